#ifndef BSDELAB_PROCESS_HPP
#define BSDELAB_PROCESS_HPP

#include <stdexcept>
#include <vector>

#include "bsdelab/linalg.hpp"
#include "bsdelab/tree.hpp"

namespace bsdelab {

// An adapted process: one value per node, read as the right-continuous value
// on [t_k, t_{k+1}). Convention X_{0-} = 0, so the root value is the jump of
// X at time 0.
template <class T>
class Adapted {
public:
    Adapted() = default;
    Adapted(SpacePtr space, T fill)
        : space_(std::move(space)), values_(space_->n_nodes(), fill) {}

    const FilteredSpace& space() const { return *space_; }
    const SpacePtr& space_ptr() const { return space_; }
    bool empty() const { return values_.empty(); }

    T& operator[](NodeId id) { return values_[static_cast<std::size_t>(id)]; }
    const T& operator[](NodeId id) const { return values_[static_cast<std::size_t>(id)]; }

private:
    SpacePtr space_;
    std::vector<T> values_;
};

// A predictable process: one value per non-terminal node, attached to the
// step (t_k, t_{k+1}] and measurable at its left endpoint. Terminal slots
// exist but are never read.
template <class T>
class Predictable {
public:
    Predictable() = default;
    Predictable(SpacePtr space, T fill)
        : space_(std::move(space)), values_(space_->n_nodes(), fill) {}

    const FilteredSpace& space() const { return *space_; }
    const SpacePtr& space_ptr() const { return space_; }
    bool empty() const { return values_.empty(); }

    T& operator[](NodeId id) { return values_[static_cast<std::size_t>(id)]; }
    const T& operator[](NodeId id) const { return values_[static_cast<std::size_t>(id)]; }

private:
    SpacePtr space_;
    std::vector<T> values_;
};

using ScalarAdapted = Adapted<double>;
using VecAdapted = Adapted<Vec>;
using MatAdapted = Adapted<Mat>;
using ScalarPredictable = Predictable<double>;
using VecPredictable = Predictable<Vec>;
using MatPredictable = Predictable<Mat>;

inline void require_same_space(const FilteredSpace& a, const FilteredSpace& b) {
    if (&a != &b) throw std::invalid_argument("processes live on different spaces");
}

}  // namespace bsdelab

#endif

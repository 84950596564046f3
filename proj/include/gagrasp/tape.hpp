#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gagrasp {

// Shape of a batched value on the tape. comp == 16 for multivector tensors
// (tokens x channels x 16), comp == 1 for plain scalar arrays
// (tokens x channels).
struct TapeShape {
  int tokens = 1;
  int channels = 1;
  int comp = 1;

  size_t size() const {
    return static_cast<size_t>(tokens) * static_cast<size_t>(channels) *
           static_cast<size_t>(comp);
  }
  bool operator==(const TapeShape&) const = default;
};

// Dynamically recorded reverse-mode tape. Ops append nodes during the
// forward pass; backward() replays them once in reverse order.
class Tape {
 public:
  struct Slot {
    TapeShape shape;
    std::vector<double> val;
    std::vector<double> grad;
  };

  int alloc(TapeShape shape) {
    Slot s;
    s.shape = shape;
    s.val.assign(shape.size(), 0.0);
    s.grad.assign(shape.size(), 0.0);
    slots_.push_back(std::move(s));
    return static_cast<int>(slots_.size()) - 1;
  }

  int leaf(TapeShape shape, std::span<const double> values) {
    if (values.size() != shape.size())
      throw std::invalid_argument("Tape::leaf: value count does not match shape");
    int id = alloc(shape);
    std::copy(values.begin(), values.end(), slots_[static_cast<size_t>(id)].val.begin());
    return id;
  }

  Slot& at(int id) { return slots_.at(static_cast<size_t>(id)); }
  const Slot& at(int id) const { return slots_.at(static_cast<size_t>(id)); }

  double* val(int id) { return at(id).val.data(); }
  const double* val(int id) const { return at(id).val.data(); }
  double* grad(int id) { return at(id).grad.data(); }

  void push_node(std::function<void(Tape&)> backward) {
    nodes_.push_back(std::move(backward));
  }

  size_t num_nodes() const { return nodes_.size(); }

  // Seeds the gradient of `out` and replays all recorded nodes backward.
  void backward(int out, std::span<const double> seed) {
    if (nodes_.empty()) throw std::runtime_error("Tape::backward: empty tape");
    Slot& o = at(out);
    if (seed.size() != o.shape.size())
      throw std::invalid_argument("Tape::backward: seed shape mismatch");
    for (auto& s : slots_) std::fill(s.grad.begin(), s.grad.end(), 0.0);
    std::copy(seed.begin(), seed.end(), o.grad.begin());
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)(*this);
  }

 private:
  std::vector<Slot> slots_;
  std::vector<std::function<void(Tape&)>> nodes_;
};

}  // namespace gagrasp

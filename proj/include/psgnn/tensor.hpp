#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace psgnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;

  void accumulate(std::span<const double> g);
  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense row-major tensor of doubles. Copies share the underlying storage;
/// use clone() for an independent copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }
  bool empty() const { return node_->data.empty(); }

  std::span<const double> data() const { return node_->data; }
  // Writes bypass the tape; only use on leaves or outside recording.
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient, or an all-zero view when nothing has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad() { node_->grad.clear(); }

  Tensor clone() const;
  /// Same values, detached from any gradient bookkeeping.
  Tensor detach() const;
  bool shares_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of differentiable operations. Each entry owns the closure
/// that propagates the output gradient into its inputs; backward() replays
/// them once each in reverse recording order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  void record(std::function<void()> backward_rule);
  std::size_t size() const { return rules_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule in reverse.
  /// The tape is consumed.
  void backward(const Tensor& loss);

  /// Tape that operations currently record onto, or nullptr.
  static Tape* active();

  /// Makes a tape active for the lifetime of the scope.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  /// Suspends recording for the lifetime of the scope.
  class Pause {
   public:
    Pause();
    ~Pause();
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::vector<std::function<void()>> rules_;
};

}  // namespace psgnn

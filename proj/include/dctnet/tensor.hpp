#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dctnet {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl;
}

/// Dense row-major tensor of 64-bit floats.
///
/// A Tensor is a handle: copies share storage and gradient. Use clone() for
/// an independent copy. When requires_grad is set the gradient buffer exists
/// and has the same shape as the data.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return impl_ != nullptr; }

    const Shape& shape() const;
    int dim(int axis) const;  // negative axes count from the back
    int rank() const;
    std::size_t numel() const;

    std::span<double> data();
    std::span<const double> data() const;
    double item() const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    std::span<double> grad();
    std::span<const double> grad() const;
    void zero_grad();

    /// Index of the producing record on the active tape, or -1 for leaves and
    /// untracked results.
    int node_id() const;

    Tensor clone() const;   // independent data, no grad, untracked
    Tensor detach() const;  // shares data, no grad, untracked

    bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

private:
    friend class Tape;
    friend Tensor make_result(Shape shape, std::vector<double> data);
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    void set_node_id(int id);

    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Builds an untracked result tensor (used by op implementations).
Tensor make_result(Shape shape, std::vector<double> data);

/// Ordered record of differentiable operations.
///
/// Records are appended in execution order so every record's inputs were
/// produced earlier (or are leaves). backward() walks the records once in
/// reverse, summing gradient contributions from all consumers.
class Tape {
public:
    struct Record {
        std::string_view name;
        std::vector<Tensor> inputs;
        Tensor output;
        std::function<void(Record&)> backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Records `output` as produced from `inputs`. Marks the output as
    /// requiring grad and assigns it a node id.
    void record(std::string_view name, std::vector<Tensor> inputs, Tensor& output,
                std::function<void(Record&)> backward);

    /// Propagates d(loss)/d(node) to every tracked tensor. The tape may be
    /// traversed once; call reset() before reusing it.
    void backward(const Tensor& loss);

    void reset();

    std::size_t size() const noexcept { return records_.size(); }
    const std::vector<Record>& records() const noexcept { return records_; }
    std::size_t count(std::string_view name) const;

private:
    std::vector<Record> records_;
    bool consumed_ = false;
};

/// The tape ops record onto in this thread, or nullptr.
Tape* active_tape() noexcept;

/// Makes `tape` active for the current thread while in scope.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Suspends recording while in scope.
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

/// True when an op with these inputs must be recorded.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(std::span<const Tensor> inputs);

}  // namespace dctnet

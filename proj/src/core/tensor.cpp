#include "dctnet/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "dctnet/error.hpp"

namespace dctnet {

namespace detail {
struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    int node_id = -1;
};
}  // namespace detail

namespace {
thread_local Tape* g_active_tape = nullptr;

void check_defined(const std::shared_ptr<detail::TensorImpl>& impl) {
    if (!impl) throw ContractError("use of an undefined tensor");
}
}  // namespace

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) +
                             " elements");
    }
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    Tensor t(std::move(impl));
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({}, {value}, requires_grad); }

Tensor make_result(Shape shape, std::vector<double> data) { return Tensor::from_data(std::move(shape), std::move(data)); }

const Shape& Tensor::shape() const {
    check_defined(impl_);
    return impl_->shape;
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

int Tensor::dim(int axis) const {
    const int r = rank();
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
    return impl_->shape[static_cast<std::size_t>(a)];
}

std::size_t Tensor::numel() const {
    check_defined(impl_);
    return impl_->data.size();
}

std::span<double> Tensor::data() {
    check_defined(impl_);
    return impl_->data;
}

std::span<const double> Tensor::data() const {
    check_defined(impl_);
    return impl_->data;
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    check_defined(impl_);
    impl_->requires_grad = flag;
    if (flag) {
        impl_->grad.assign(impl_->data.size(), 0.0);
    } else {
        impl_->grad.clear();
        impl_->grad.shrink_to_fit();
    }
}

std::span<double> Tensor::grad() {
    if (!requires_grad()) throw ContractError("grad() on a tensor that does not require grad");
    return impl_->grad;
}

std::span<const double> Tensor::grad() const {
    if (!requires_grad()) throw ContractError("grad() on a tensor that does not require grad");
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (requires_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

int Tensor::node_id() const { return impl_ ? impl_->node_id : -1; }

void Tensor::set_node_id(int id) { impl_->node_id = id; }

Tensor Tensor::clone() const { return from_data(shape(), impl_->data); }

Tensor Tensor::detach() const {
    check_defined(impl_);
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

// ---------------------------------------------------------------------------

void Tape::record(std::string_view name, std::vector<Tensor> inputs, Tensor& output,
                  std::function<void(Record&)> backward) {
    if (consumed_) throw ContractError("recording onto a tape that was already traversed; reset() it first");
    output.set_requires_grad(true);
    output.set_node_id(static_cast<int>(records_.size()));
    records_.push_back(Record{name, std::move(inputs), output, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw ContractError("backward() called twice on the same tape without reset()");
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward() requires a scalar loss, got shape " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    }
    const int id = loss.node_id();
    if (id < 0 || static_cast<std::size_t>(id) >= records_.size() || !records_[id].output.same_storage(loss)) {
        throw ContractError("backward() on a loss that was not produced under this tape");
    }
    consumed_ = true;
    Tensor seed = loss;
    seed.grad()[0] += 1.0;
    for (std::size_t i = static_cast<std::size_t>(id) + 1; i-- > 0;) {
        Record& rec = records_[i];
        if (rec.backward) rec.backward(rec);
    }
}

void Tape::reset() {
    for (auto& rec : records_) rec.output.set_node_id(-1);
    records_.clear();
    consumed_ = false;
}

std::size_t Tape::count(std::string_view name) const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [&](const Record& r) { return r.name == name; }));
}

Tape* active_tape() noexcept { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!g_active_tape) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t && t->requires_grad(); });
}

bool should_record(std::span<const Tensor> inputs) {
    if (!g_active_tape) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

}  // namespace dctnet

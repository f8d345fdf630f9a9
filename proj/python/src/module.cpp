#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "dctnet/app/verify.hpp"
#include "dctnet/data/dataset_io.hpp"
#include "dctnet/error.hpp"
#include "dctnet/metrics/metrics.hpp"
#include "dctnet/model/checkpoint.hpp"
#include "dctnet/model/predict.hpp"
#include "dctnet/model/train.hpp"

namespace py = pybind11;
using namespace dctnet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor::from_data(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

data::ClipSpec parse_spec(const std::string& json) {
    try {
        return nlohmann::json::parse(json).get<data::ClipSpec>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("clip spec: ") + e.what());
    }
}

py::dict frame_dict(const data::TrimodalSample& s) {
    py::dict d;
    d["rgb"] = to_array(s.rgb);
    d["depth"] = to_array(s.depth);
    d["flow"] = to_array(s.flow);
    d["gt"] = to_array(s.gt);
    return d;
}

data::Dataset clips_from_specs(const std::vector<std::string>& specs) {
    data::Dataset ds;
    for (std::size_t i = 0; i < specs.size(); ++i) ds.push_back(data::make_clip("clip_" + std::to_string(i), parse_spec(specs[i])));
    return ds;
}

class PyModel {
public:
    explicit PyModel(const std::string& config_json) {
        model::ModelConfig cfg;
        try {
            cfg = nlohmann::json::parse(config_json).get<model::ModelConfig>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("model config: ") + e.what());
        }
        net_ = std::make_unique<model::DctNet>(cfg);
    }
    explicit PyModel(std::unique_ptr<model::DctNet> net) : net_(std::move(net)) {}

    std::vector<Array> forward(const Array& rgb, const Array& depth, const Array& flow, bool train) {
        NoGradScope no_grad;
        const auto out = net_->forward(to_tensor(rgb), to_tensor(depth), to_tensor(flow), train ? nn::Mode::Train : nn::Mode::Eval);
        std::vector<Array> result;
        for (const auto& l : out.logits) result.push_back(to_array(l));
        return result;
    }

    std::vector<double> fit(const std::vector<std::string>& specs) {
        const data::Dataset ds = clips_from_specs(specs);
        py::gil_scoped_release release;
        const auto log = model::fit(*net_, ds);
        std::vector<double> losses;
        for (const auto& e : log.entries) losses.push_back(e.loss);
        return losses;
    }

    std::vector<Array> predict(const std::string& spec) {
        const data::Clip clip = data::make_clip("clip", parse_spec(spec));
        std::vector<Array> maps;
        for (const auto& p : model::predict_clip(*net_, clip)) maps.push_back(to_array(p));
        return maps;
    }

    py::dict evaluate(const std::vector<std::string>& specs) {
        const auto report = model::evaluate_model(*net_, clips_from_specs(specs));
        py::dict d;
        d["s_measure"] = report.s_measure;
        d["max_f"] = report.max_f;
        d["mae"] = report.mae;
        return d;
    }

    void save(const std::string& dir, int step) { model::save_checkpoint(dir, *net_, step); }
    std::size_t parameter_count() { return net_->parameters().scalar_count(); }
    std::string config() const { return nlohmann::json(net_->config()).dump(); }

private:
    std::unique_ptr<model::DctNet> net_;
};

}  // namespace

PYBIND11_MODULE(_dctnet, m) {
    m.doc() = "Trimodal video saliency network, metrics and synthetic data.";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_IOError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);

    m.def("generate_clip", [](const std::string& spec) {
        py::list frames;
        for (const auto& s : data::generate_clip(parse_spec(spec))) frames.append(frame_dict(s));
        return frames;
    }, py::arg("spec_json"));
    m.def("flow_to_color", [](const Array& flow) { return to_array(data::flow_to_color(to_tensor(flow))); });
    m.def("read_dataset", [](const std::string& dir) {
        py::dict out;
        for (const auto& clip : data::read_dataset(dir)) {
            py::list frames;
            for (const auto& s : clip.frames) frames.append(frame_dict(s));
            out[py::str(clip.name)] = frames;
        }
        return out;
    });

    m.def("mae", [](const Array& p, const Array& g) { return metrics::mae(to_tensor(p), to_tensor(g)); });
    m.def("max_f_measure", [](const Array& p, const Array& g, int thresholds, double beta_sq) {
        metrics::MetricsConfig cfg;
        cfg.thresholds = thresholds;
        cfg.beta_sq = beta_sq;
        cfg.validate();
        const auto c = metrics::max_f_measure(to_tensor(p), to_tensor(g), cfg);
        return py::make_tuple(c.max_f, c.precision, c.recall);
    }, py::arg("pred"), py::arg("gt"), py::arg("thresholds") = 256, py::arg("beta_sq") = 0.3);
    m.def("s_measure", [](const Array& p, const Array& g, double alpha) {
        metrics::MetricsConfig cfg;
        cfg.alpha = alpha;
        cfg.validate();
        return metrics::s_measure(to_tensor(p), to_tensor(g), cfg);
    }, py::arg("pred"), py::arg("gt"), py::arg("alpha") = 0.5);

    m.def("softmax_rows", [](const Array& x) { return to_array(ops::softmax_rows(to_tensor(x))); });
    m.def("conv2d", [](const Array& x, const Array& w, std::optional<Array> b, int stride, int padding, int dilation) {
        return to_array(ops::conv2d(to_tensor(x), to_tensor(w), b ? to_tensor(*b) : Tensor(), {stride, dilation, padding}));
    }, py::arg("x"), py::arg("weight"), py::arg("bias") = py::none(), py::arg("stride") = 1, py::arg("padding") = 0,
          py::arg("dilation") = 1);

    m.def("gradcheck", [](const std::string& scope) {
        std::vector<app::CheckResult> results;
        {
            py::gil_scoped_release release;
            results = app::run_gradcheck_suite(scope);
        }
        py::list out;
        for (const auto& r : results) {
            py::dict d;
            d["scope"] = r.scope;
            d["name"] = r.name;
            d["error"] = r.error;
            d["tolerance"] = r.tolerance;
            d["passed"] = r.passed();
            out.append(d);
        }
        return out;
    }, py::arg("scope") = "ops");

    py::class_<PyModel>(m, "Model")
        .def(py::init<const std::string&>(), py::arg("config_json") = "{}")
        .def_static("load", [](const std::string& dir) { return PyModel(model::load_checkpoint(dir).model); })
        .def("forward", &PyModel::forward, py::arg("rgb"), py::arg("depth"), py::arg("flow"), py::arg("train") = false)
        .def("fit", &PyModel::fit, py::arg("spec_jsons"))
        .def("predict", &PyModel::predict, py::arg("spec_json"))
        .def("evaluate", &PyModel::evaluate, py::arg("spec_jsons"))
        .def("save", &PyModel::save, py::arg("dir"), py::arg("step") = 0)
        .def_property_readonly("parameter_count", &PyModel::parameter_count)
        .def_property_readonly("config_json", &PyModel::config);
}

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "sensekit/error.hpp"
#include "sensekit/eval.hpp"
#include "sensekit/io.hpp"
#include "sensekit/teacher.hpp"
#include "sensekit/train.hpp"

namespace py = pybind11;
using namespace sensekit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& data, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(double));
  return out;
}

void from_array(std::vector<double>& data, const Array& a, const char* name) {
  if (static_cast<std::size_t>(a.size()) != data.size()) {
    throw DataError(std::string(name) + ": expected " + std::to_string(data.size()) +
                    " values, got " + std::to_string(a.size()));
  }
  std::memcpy(data.data(), a.data(), data.size() * sizeof(double));
}

py::ssize_t ss(std::size_t n) { return static_cast<py::ssize_t>(n); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-sense word embeddings with contextual-teacher distillation";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // corpus
  m.def("tokenize", [](std::string_view text) { return tokenize(text); });

  py::class_<Vocabulary>(m, "Vocabulary")
      .def(py::init<std::vector<std::string>, std::vector<std::uint64_t>>(), py::arg("words"),
           py::arg("counts"))
      .def("__len__", &Vocabulary::size)
      .def("id_of", [](const Vocabulary& v, std::string_view w) { return v.id_of(w); })
      .def("word", &Vocabulary::word)
      .def_property_readonly("words", &Vocabulary::words)
      .def_property_readonly("counts", &Vocabulary::counts)
      .def("digest", [](const Vocabulary& v) { return to_hex(v.digest()); });

  m.def("build_vocab",
        [](const std::vector<std::string>& tokens, std::uint64_t min_count) {
          return build_vocab(std::span<const std::string>(tokens), min_count);
        },
        py::arg("tokens"), py::arg("min_count") = 1);
  m.def("build_vocab_from_corpus",
        [](const std::filesystem::path& path, std::uint64_t min_count) {
          return build_vocab(read_corpus(path), min_count);
        },
        py::arg("path"), py::arg("min_count") = 1);
  m.def("save_vocab", &save_vocab);
  m.def("load_vocab", &load_vocab);
  m.def("window_key", [](std::uint32_t doc, std::uint32_t par, std::uint32_t off) {
    return WindowPosition{doc, par, off}.key();
  });

  // model
  py::class_<SenseModelParams>(m, "SenseModel")
      .def_property_readonly("vocab_size", &SenseModelParams::vocab_size)
      .def_property_readonly("senses", &SenseModelParams::senses)
      .def_property_readonly("dim", &SenseModelParams::dim)
      .def_property(
          "global_vectors",
          [](const SenseModelParams& p) {
            return to_array(p.global_data(), {ss(p.vocab_size()), ss(p.dim())});
          },
          [](SenseModelParams& p, const Array& a) { from_array(p.global_data(), a, "global_vectors"); })
      .def_property(
          "sense_vectors",
          [](const SenseModelParams& p) {
            return to_array(p.sense_data(), {ss(p.vocab_size()), ss(p.senses()), ss(p.dim())});
          },
          [](SenseModelParams& p, const Array& a) { from_array(p.sense_data(), a, "sense_vectors"); })
      .def_property(
          "disamb_vectors",
          [](const SenseModelParams& p) {
            return to_array(p.disamb_data(), {ss(p.vocab_size()), ss(p.senses()), ss(p.dim())});
          },
          [](SenseModelParams& p, const Array& a) { from_array(p.disamb_data(), a, "disamb_vectors"); })
      .def("sense_posterior",
           [](const SenseModelParams& p, WordId w, const std::vector<double>& c, double t) {
             return sense_posterior(w, c, p, t).probs;
           },
           py::arg("word"), py::arg("context"), py::arg("temperature") = 1.0)
      .def("contextual_posterior",
           [](const SenseModelParams& p, const std::vector<WordId>& ids, std::size_t target,
              int window) {
             SenseContextOptions o;
             o.window = window;
             return contextual_posterior({ids, target}, p, o).probs;
           },
           py::arg("ids"), py::arg("target"), py::arg("window") = 5);

  m.def("init_model", &init_params, py::arg("vocab_size"), py::arg("senses"), py::arg("dim"),
        py::arg("seed") = 1);
  m.def("save_model", &save_model, py::arg("model"), py::arg("vocab"), py::arg("path"),
        py::arg("float_width") = 4);
  m.def("load_model",
        [](const std::filesystem::path& path, const Vocabulary& vocab) { return load_model(path, vocab); });
  m.def("export_text", &export_text);
  m.def("softmax", [](const std::vector<double>& z, double t) { return softmax(z, t); },
        py::arg("logits"), py::arg("temperature") = 1.0);

  // train
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("window", &TrainConfig::window)
      .def_readwrite("negatives", &TrainConfig::negatives)
      .def_readwrite("senses", &TrainConfig::senses)
      .def_readwrite("dim", &TrainConfig::dim)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("temperature", &TrainConfig::temperature)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("distill", &TrainConfig::distill)
      .def_readwrite("threads", &TrainConfig::threads)
      .def_property(
          "context", [](const TrainConfig& c) { return std::string(to_string(c.context)); },
          [](TrainConfig& c, std::string_view s) {
            auto v = parse_context_mode(s);
            if (!v) throw DataError("unknown context mode: " + std::string(s));
            c.context = *v;
          })
      .def_property(
          "kd_direction", [](const TrainConfig& c) { return std::string(to_string(c.kd_direction)); },
          [](TrainConfig& c, std::string_view s) {
            auto v = parse_kd_direction(s);
            if (!v) throw DataError("unknown kd direction: " + std::string(s));
            c.kd_direction = *v;
          });

  m.def(
      "train",
      [](const std::filesystem::path& corpus, const Vocabulary& vocab, const TrainConfig& config,
         const PosteriorStore* teacher) {
        auto encoded = encode_corpus(read_corpus(corpus), vocab);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(encoded, vocab, config, teacher);
        }
        std::vector<double> losses;
        for (const auto& e : r.epochs) losses.push_back(e.mean_loss);
        return py::make_tuple(std::move(r.params), losses);
      },
      py::arg("corpus"), py::arg("vocab"), py::arg("config"), py::arg("teacher") = nullptr,
      "Trains on a corpus file or directory; returns (model, per-epoch mean loss).");

  m.def("distill_loss",
        [](const std::vector<double>& logits, const std::vector<double>& teacher, double t,
           std::string_view direction) {
          auto d = parse_kd_direction(direction);
          if (!d) throw DataError("unknown kd direction: " + std::string(direction));
          return distill_loss(logits, teacher, t, *d);
        },
        py::arg("logits"), py::arg("teacher"), py::arg("temperature") = 4.0,
        py::arg("direction") = "paper");

  // teacher
  py::class_<PosteriorStore>(m, "PosteriorStore")
      .def(py::init<std::size_t>(), py::arg("senses"))
      .def("__len__", &PosteriorStore::size)
      .def_property_readonly("senses", &PosteriorStore::senses)
      .def("insert", [](PosteriorStore& s, std::uint64_t key, const std::vector<double>& p) {
        s.insert(key, p);
      })
      .def("find", [](const PosteriorStore& s, std::uint64_t key) -> std::optional<std::vector<double>> {
        auto p = s.find(key);
        if (p.empty()) return std::nullopt;
        return std::vector<double>(p.begin(), p.end());
      });
  m.def("write_posteriors", &write_posteriors);
  m.def("read_posteriors", &read_posteriors);

  m.def(
      "write_teacher_records",
      [](const std::filesystem::path& path, const Vocabulary& vocab, std::uint32_t window,
         const py::list& records) {
        TeacherRecordStore store;
        store.header.window = window;
        store.header.vocab_digest = vocab.digest();
        for (const auto& item : records) {
          auto rec = item.cast<py::dict>();
          TeacherRecord r;
          r.key = rec["key"].cast<std::uint64_t>();
          r.center = rec["center"].cast<WordId>();
          for (const auto& v : rec["vectors"].cast<py::list>()) {
            auto t = v.cast<py::tuple>();
            r.vectors.push_back({t[0].cast<std::int8_t>(), t[1].cast<WordId>(),
                                 t[2].cast<std::vector<float>>()});
          }
          if (store.header.dim == 0 && !r.vectors.empty()) {
            store.header.dim = static_cast<std::uint32_t>(r.vectors.front().values.size());
          }
          store.records.push_back(std::move(r));
        }
        write_teacher_records(store, path);
      },
      py::arg("path"), py::arg("vocab"), py::arg("window"), py::arg("records"),
      "records: list of {'key', 'center', 'vectors': [(offset, word, values), ...]}");

  m.def("validate_teacher_records", [](const std::filesystem::path& path, const Vocabulary& vocab) {
    auto r = validate_teacher_records(path, vocab);
    py::dict out;
    out["ok"] = r.ok;
    out["records"] = r.records;
    out["first_bad_record"] = r.first_bad_record;
    out["message"] = r.message;
    return out;
  });

  m.def(
      "fit_teacher",
      [](const std::filesystem::path& records, const Vocabulary& vocab, std::size_t senses,
         std::size_t epochs, double lr, std::uint64_t seed, double export_temperature) {
        auto store = read_teacher_records(records, &vocab);
        TeacherFitConfig cfg;
        cfg.senses = senses;
        cfg.epochs = epochs;
        cfg.lr = lr;
        cfg.seed = seed;
        TeacherFitResult fit;
        {
          py::gil_scoped_release release;
          fit = fit_teacher(store, vocab.size(), cfg);
        }
        return py::make_tuple(export_posteriors(store, fit.params, export_temperature),
                              fit.epoch_losses);
      },
      py::arg("records"), py::arg("vocab"), py::arg("senses") = 3, py::arg("epochs") = 5,
      py::arg("lr") = 0.001, py::arg("seed") = 1, py::arg("export_temperature") = 1.0,
      "Fits teacher senses; returns (posterior store, per-epoch loss).");

  // eval
  m.def("ari", [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return ari(std::span<const std::string>(a), std::span<const std::string>(b));
  });
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) {
    return spearman(x, y);
  });
  m.def(
      "eval_wsi",
      [](const SenseModelParams& p, const Vocabulary& vocab, const std::filesystem::path& path) {
        auto data = load_wsi(path, vocab);
        auto r = eval_wsi(data.instances, vocab, p);
        return py::make_tuple(r.mean, data.skipped_oov + r.skipped_instances);
      },
      "Returns (mean ARI, skipped instances).");
  m.def(
      "eval_scws",
      [](const SenseModelParams& p, const Vocabulary& vocab, const std::filesystem::path& path,
         std::string_view metric) {
        auto data = load_scws(path, vocab);
        auto r = eval_scws(data, p, metric == "maxsimc" ? SimMetric::kMaxSimC : SimMetric::kAvgSimC);
        return py::make_tuple(r.rho, r.skipped);
      },
      py::arg("model"), py::arg("vocab"), py::arg("path"), py::arg("metric") = "avgsimc",
      "Returns (Spearman rho, skipped pairs).");
  m.def(
      "nearest_neighbors",
      [](const SenseModelParams& p, const Vocabulary& vocab, std::string_view word,
         std::string_view context, std::size_t top) {
        auto id = vocab.id_of(word);
        if (!id) throw DataError("word not in vocabulary: " + std::string(word));
        auto tokens = tokenize(context);
        auto r = nearest_neighbors(*id, tokens, vocab, p, top);
        std::vector<std::pair<std::string, double>> rows;
        for (const auto& n : r.neighbors) rows.emplace_back(vocab.word(n.word), n.cosine);
        return py::make_tuple(r.sense, r.probability, rows);
      },
      py::arg("model"), py::arg("vocab"), py::arg("word"), py::arg("context"), py::arg("top") = 10,
      "Returns (sense, probability, [(word, cosine), ...]).");
}

// Python module _core: one ReplayBuffer class over the two-lock prioritized
// replay buffer. Transitions cross as flat float64 arrays; sampled indices and
// priorities come back as numpy arrays that take ownership of the result
// vectors without a further copy. The GIL is released inside core calls.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <atomic>
#include <memory>
#include <optional>
#include <random>
#include <unordered_map>

#include "parl/error.hpp"
#include "parl/replay_buffer.hpp"
#include "parl/version.hpp"

namespace py = pybind11;

namespace {

using Buffer = parl::PrioritizedReplayBuffer;
using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Indices = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

class ClosedError : public parl::Error {
 public:
  ClosedError() : parl::Error("replay buffer is closed") {}
};

template <class T>
py::array_t<T> to_numpy(std::vector<T>&& v) {
  auto* owned = new std::vector<T>(std::move(v));
  py::capsule free(owned, [](void* p) { delete static_cast<std::vector<T>*>(p); });
  return py::array_t<T>(static_cast<py::ssize_t>(owned->size()), owned->data(), free);
}

std::vector<double> to_vector(const Doubles& a) {
  if (a.ndim() > 1) throw parl::ParameterError("expected a one-dimensional array");
  return {a.data(), a.data() + a.size()};
}

std::vector<std::size_t> to_indices(const Indices& a) {
  if (a.ndim() > 1) throw parl::ParameterError("expected a one-dimensional index array");
  std::vector<std::size_t> out(static_cast<std::size_t>(a.size()));
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    if (a.data()[i] < 0) throw parl::IndexError("negative index");
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(a.data()[i]);
  }
  return out;
}

class Handle {
 public:
  explicit Handle(const parl::BufferConfig& c, std::uint64_t seed)
      : buffer_(std::make_shared<Buffer>(c)), seed_(seed) {}

  void close() { std::atomic_store(&buffer_, std::shared_ptr<Buffer>()); }
  bool closed() const { return !std::atomic_load(&buffer_); }

  std::shared_ptr<Buffer> get() const {
    auto b = std::atomic_load(&buffer_);
    if (!b) throw ClosedError();
    return b;
  }

  // One engine per calling thread, seeded from the handle seed and a counter.
  parl::Rng& thread_rng() {
    thread_local std::unordered_map<const Handle*, parl::Rng> engines;
    auto it = engines.find(this);
    if (it == engines.end()) {
      const std::uint64_t id = next_stream_.fetch_add(1);
      std::seed_seq seq{seed_, id};
      it = engines.emplace(this, parl::Rng(seq)).first;
    }
    return it->second;
  }

 private:
  std::shared_ptr<Buffer> buffer_;
  std::uint64_t seed_;
  std::atomic<std::uint64_t> next_stream_{0};
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Concurrent prioritized replay buffer on a K-ary sum tree";
  m.attr("__version__") = parl::kVersion;

  auto error = py::register_exception<parl::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<parl::ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<parl::IndexError>(m, "IndexError", PyExc_IndexError);
  py::register_exception<parl::EmptyError>(m, "EmptyError", error.ptr());
  py::register_exception<ClosedError>(m, "ClosedError", error.ptr());

  py::class_<Handle>(m, "ReplayBuffer")
      .def(py::init([](std::size_t capacity, std::size_t fanout, std::size_t state_dim,
                       std::optional<std::size_t> action_dim, double alpha, double epsilon,
                       double beta, std::uint64_t seed) {
             parl::BufferConfig c;
             c.capacity = capacity;
             c.fanout = fanout;
             c.state_dim = state_dim;
             if (action_dim) {
               c.action_kind = parl::ActionKind::continuous;
               c.action_dim = *action_dim;
             }
             c.alpha = alpha;
             c.epsilon_priority = epsilon;
             c.beta = beta;
             return std::make_unique<Handle>(c, seed);
           }),
           py::arg("capacity"), py::arg("fanout") = parl::SumTree::kDefaultFanout,
           py::arg("state_dim") = 1, py::arg("action_dim") = py::none(), py::arg("alpha") = 0.6,
           py::arg("epsilon") = 1e-6, py::arg("beta") = 0.4, py::arg("seed") = 0,
           "action_dim=None stores discrete integer actions; an integer stores "
           "continuous actions of that length.")
      .def_property_readonly("capacity", [](const Handle& h) { return h.get()->capacity(); })
      .def_property_readonly("fanout", [](const Handle& h) { return h.get()->config().fanout; })
      .def_property_readonly("state_dim", [](const Handle& h) { return h.get()->config().state_dim; })
      .def_property_readonly("closed", &Handle::closed)
      .def("__len__", [](const Handle& h) { return h.get()->size(); })
      .def("max_priority", [](const Handle& h) { return h.get()->max_priority(); })
      .def("total", [](const Handle& h) {
        auto b = h.get();
        py::gil_scoped_release release;
        return b->total();
      })
      .def(
          "insert",
          [](const Handle& h, const Doubles& state, const py::object& action,
             const Doubles& next_state, double reward, bool done) {
            auto b = h.get();
            parl::Transition t;
            t.state = to_vector(state);
            t.next_state = to_vector(next_state);
            if (b->config().action_kind == parl::ActionKind::discrete) {
              t.action = action.cast<parl::DiscreteAction>();
            } else {
              t.action = to_vector(action.cast<Doubles>());
            }
            t.reward = reward;
            t.done = done;
            py::gil_scoped_release release;
            return b->insert(t);
          },
          py::arg("state"), py::arg("action"), py::arg("next_state"), py::arg("reward"),
          py::arg("done"))
      .def(
          "sample",
          [](Handle& h, std::size_t batch_size, std::optional<std::uint64_t> seed) {
            auto b = h.get();
            std::vector<std::int64_t> idx;
            std::vector<double> pri;
            {
              py::gil_scoped_release release;
              std::optional<parl::Rng> local;
              if (seed) local.emplace(*seed);
              const auto drawn = b->sample(batch_size, local ? *local : h.thread_rng());
              idx.reserve(drawn.size());
              pri.reserve(drawn.size());
              for (const auto& d : drawn) {
                idx.push_back(static_cast<std::int64_t>(d.index));
                pri.push_back(d.priority);
              }
            }
            return py::make_tuple(to_numpy(std::move(idx)), to_numpy(std::move(pri)));
          },
          py::arg("batch_size"), py::arg("seed") = py::none(),
          "Returns (indices, priorities). With seed, draws from a fresh engine.")
      .def("get_priority",
           [](const Handle& h, const Indices& indices) {
             auto b = h.get();
             const auto idx = to_indices(indices);
             std::vector<double> out;
             {
               py::gil_scoped_release release;
               out = b->get_priority(idx);
             }
             return to_numpy(std::move(out));
           })
      .def(
          "update_priority",
          [](const Handle& h, const Indices& indices, const Doubles& td_errors) {
            auto b = h.get();
            const auto idx = to_indices(indices);
            const auto td = to_vector(td_errors);
            py::gil_scoped_release release;
            b->update_priority(idx, td);
          },
          py::arg("indices"), py::arg("td_errors"))
      .def(
          "importance_weights",
          [](const Handle& h, const Doubles& priorities, std::optional<double> beta) {
            auto b = h.get();
            const auto p = to_vector(priorities);
            std::vector<double> out;
            {
              py::gil_scoped_release release;
              out = beta ? b->importance_weights(p, *beta) : b->importance_weights(p);
            }
            return to_numpy(std::move(out));
          },
          py::arg("priorities"), py::arg("beta") = py::none())
      .def("load",
           [](const Handle& h, std::size_t index) {
             const parl::Transition t = h.get()->load(index);
             py::object action;
             if (const auto* d = std::get_if<parl::DiscreteAction>(&t.action)) {
               action = py::int_(*d);
             } else {
               action = to_numpy(std::vector<double>(std::get<parl::ContinuousAction>(t.action)));
             }
             return py::make_tuple(to_numpy(std::vector<double>(t.state)), action,
                                   to_numpy(std::vector<double>(t.next_state)), t.reward, t.done);
           },
           "Returns (state, action, next_state, reward, done).")
      .def("verify",
           [](const Handle& h) {
             const parl::ConsistencyReport r = h.get()->verify();
             py::dict d;
             d["ok"] = r.ok();
             d["root"] = r.root;
             d["leaf_sum"] = r.leaf_sum;
             d["relative_error"] = r.relative_error();
             d["checksum_failures"] = r.checksum_failures;
             d["unwritten_positive"] = r.unwritten_positive;
             return d;
           },
           "Quiescent consistency audit.")
      .def("close", &Handle::close, "Releases the buffer; later calls raise ClosedError.");
}

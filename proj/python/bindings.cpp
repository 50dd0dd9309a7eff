#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mhd/harness.hpp"

namespace py = pybind11;
using namespace mhd;

PYBIND11_MODULE(_mhdcore, m) {
  m.doc() = "compressible viscous MHD core";

  py::class_<eos::ThermoPoint>(m, "ThermoPoint")
      .def(py::init<double, double>(), py::arg("rho"), py::arg("theta"))
      .def_readwrite("rho", &eos::ThermoPoint::rho)
      .def_readwrite("theta", &eos::ThermoPoint::theta);

  py::class_<eos::Model, std::shared_ptr<eos::Model>>(m, "EosModel")
      .def("name", &eos::Model::name)
      .def("pressure", &eos::Model::pressure)
      .def("internal_energy", &eos::Model::internal_energy)
      .def("entropy", &eos::Model::entropy)
      .def("gibbs_free_energy", &eos::Model::gibbs_free_energy)
      .def("sound_speed2", &eos::Model::sound_speed2)
      .def("invert_temperature", &eos::Model::invert_temperature);

  m.def(
      "ideal_eos",
      [](double c_v) -> std::shared_ptr<eos::Model> {
        return std::make_shared<eos::IdealPolytropic>(c_v);
      },
      py::arg("c_v") = 1.5);
  m.def(
      "monatomic_radiation_eos",
      [](double p_infinity, double a) -> std::shared_ptr<eos::Model> {
        return std::make_shared<eos::MonatomicRadiation>(p_infinity, a);
      },
      py::arg("p_infinity") = 1.0, py::arg("a") = 0.1);

  py::class_<relent::StatePoint>(m, "StatePoint")
      .def(py::init([](double rho, double theta, Vec3 u, Vec3 B) {
             return relent::StatePoint{rho, theta, u, B};
           }),
           py::arg("rho"), py::arg("theta"), py::arg("u") = Vec3{0, 0, 0},
           py::arg("B") = Vec3{0, 0, 0});
  py::class_<relent::RefStatePoint>(m, "RefStatePoint")
      .def(py::init([](double r, double Theta, Vec3 U, Vec3 H) {
             return relent::RefStatePoint{r, Theta, U, H};
           }),
           py::arg("r"), py::arg("Theta"), py::arg("U") = Vec3{0, 0, 0},
           py::arg("H") = Vec3{0, 0, 0});
  m.def("rel_energy_density",
        [](const relent::StatePoint& pt, const relent::RefStatePoint& ref,
           const std::shared_ptr<eos::Model>& eosm) {
          return relent::rel_energy_density(pt, ref, *eosm);
        });

  m.def("cutoff_weight", [](double delta, double rho, double theta) {
    relent::CutoffSpec spec;
    spec.delta = delta;
    return relent::cutoff_weight(spec, {rho, theta});
  });

  m.def("gronwall_fit",
        [](const std::vector<double>& times, const std::vector<double>& H) {
          const relent::GronwallFit f = relent::gronwall_fit(times, H);
          return py::make_tuple(f.c_fit, f.max_violation);
        });

  py::class_<harness::RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("from_json_text", &harness::RunConfig::from_json_text)
      .def_static("from_json_file", &harness::RunConfig::from_json_file)
      .def("canonical_json", &harness::RunConfig::canonical_json)
      .def("config_hash", &harness::RunConfig::config_hash)
      .def("validate", &harness::RunConfig::validate);

  py::class_<harness::CsvRow>(m, "CsvRow")
      .def_readonly("t", &harness::CsvRow::t)
      .def_readonly("mass", &harness::CsvRow::mass)
      .def_readonly("E_total", &harness::CsvRow::E_total)
      .def_readonly("S_total", &harness::CsvRow::S_total)
      .def_readonly("E_ballistic", &harness::CsvRow::E_ballistic)
      .def_readonly("H_rel", &harness::CsvRow::H_rel)
      .def_readonly("prod_min", &harness::CsvRow::prod_min)
      .def_readonly("divB_max", &harness::CsvRow::divB_max)
      .def_readonly("entropy_residual", &harness::CsvRow::entropy_residual);

  m.def("run_simulation", [](const harness::RunConfig& cfg) {
    return harness::run_simulation(cfg).rows;
  });
  m.def("run_eos_check", [](const harness::RunConfig& cfg) {
    const harness::EosCheckResult r = harness::run_eos_check(cfg);
    py::dict d;
    d["gibbs_residual_theta"] = r.gibbs.max_residual_theta;
    d["gibbs_residual_rho"] = r.gibbs.max_residual_rho;
    d["stability_pass"] = r.stability.pass;
    d["pass"] = r.pass;
    return d;
  });
  m.def(
      "run_kp_check",
      [](const harness::RunConfig& cfg, int sweep) {
        const harness::KpResult r = harness::run_kp_check(cfg, sweep);
        return py::make_tuple(r.max_ratio, r.max_ratio_refined);
      },
      py::arg("cfg"), py::arg("sweep") = 8);

  m.def("sha1_hex", &sha1_hex);
}

#include "moranfilt/diagnostics.hpp"
#include "moranfilt/eigenbase.hpp"
#include "moranfilt/errors.hpp"
#include "moranfilt/esf.hpp"
#include "moranfilt/reesf.hpp"
#include "moranfilt/simgen.hpp"
#include "moranfilt/spatial_graph.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace moranfilt;

namespace {

KernelSpec make_kernel(const std::string& family, double range) {
  return KernelSpec{parse_kernel_tag(family), range};
}

Coordinates make_coords(const Eigen::MatrixX2d& points) { return Coordinates(points); }

py::dict esf_dict(const EsfFit& f) {
  py::dict d;
  d["beta"] = f.beta;
  d["beta_se"] = f.beta_se;
  d["gamma"] = f.gamma;
  d["gamma_se"] = f.gamma_se;
  d["sigma2"] = f.sigma2;
  d["selected"] = f.selected;
  d["residuals"] = f.residuals;
  d["adj_r2"] = f.adj_r2;
  return d;
}

EigenBasis basis_from(const MatrixXd& vectors, const VectorXd& values) {
  EigenBasis b;
  b.vectors = vectors;
  b.values = values;
  return b;
}

}  // namespace

PYBIND11_MODULE(_moranfilt, m) {
  m.doc() = "Fast eigenvector spatial filtering with Nystrom Moran eigenvectors";

  const auto& base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.def("kernel_value",
        [](const std::string& family, double range, double d) {
          return kernel_value(make_kernel(family, range), d);
        },
        py::arg("family"), py::arg("range"), py::arg("d"));

  m.def("estimate_range_mst",
        [](const Eigen::MatrixX2d& points) { return estimate_range_mst(make_coords(points)); },
        py::arg("points"));

  m.def("select_knots",
        [](const Eigen::MatrixX2d& points, Index count, std::uint64_t seed) {
          return Eigen::MatrixX2d(select_knots(make_coords(points), count, seed).knots.points());
        },
        py::arg("points"), py::arg("count"), py::arg("seed") = 1);

  m.def("nystrom_eigen",
        [](const Eigen::MatrixX2d& points, const Eigen::MatrixX2d& knots, double range,
           const std::string& family) {
          const EigenBasis b = nystrom_moran_eigen(make_coords(points), KnotSet{make_coords(knots), 0},
                                                   make_kernel(family, range));
          return py::make_tuple(b.vectors, b.values);
        },
        py::arg("points"), py::arg("knots"), py::arg("range"), py::arg("family") = "exp");

  m.def("exact_eigen",
        [](const Eigen::MatrixX2d& points, double range, const std::string& family, bool keep_all) {
          const EigenBasis b = exact_moran_eigen(
              build_connectivity(make_coords(points), make_kernel(family, range), true), keep_all);
          return py::make_tuple(b.vectors, b.values);
        },
        py::arg("points"), py::arg("range"), py::arg("family") = "exp", py::arg("keep_all") = false);

  m.def("moran_coefficient",
        [](const VectorXd& y, const Eigen::MatrixX2d& points, double range,
           const std::string& family) {
          return moran_coefficient(
              y, build_connectivity(make_coords(points), make_kernel(family, range), true));
        },
        py::arg("y"), py::arg("points"), py::arg("range"), py::arg("family") = "exp");

  m.def("lambda_alpha", &lambda_alpha, py::arg("values"), py::arg("alpha"));

  m.def("fit_ols", [](const MatrixXd& x, const VectorXd& y) { return esf_dict(fit_ols(x, y)); },
        py::arg("x"), py::arg("y"));

  m.def("fit_esf",
        [](const MatrixXd& x, const VectorXd& y, const MatrixXd& vectors, const VectorXd& values,
           std::optional<double> screening) {
          return esf_dict(fit_esf(x, y, basis_from(vectors, values), screening));
        },
        py::arg("x"), py::arg("y"), py::arg("vectors"), py::arg("values"),
        py::arg("screening") = py::none());

  m.def("fit_reesf",
        [](const MatrixXd& x, const VectorXd& y, const MatrixXd& vectors, const VectorXd& values) {
          const ReesfFit f = fit_reesf(x, y, basis_from(vectors, values));
          py::dict d;
          d["beta"] = f.beta;
          d["beta_se"] = f.beta_se;
          d["u"] = f.u;
          d["gamma"] = f.gamma;
          d["gamma_se"] = f.gamma_se;
          d["alpha"] = f.theta.alpha;
          d["sigma_gamma2"] = f.theta.sigma_gamma2;
          d["sigma2"] = f.sigma2;
          d["cov"] = f.cov;
          d["loglik"] = f.loglik;
          d["residuals"] = f.residuals;
          return d;
        },
        py::arg("x"), py::arg("y"), py::arg("vectors"), py::arg("values"));

  m.def("residual_mc_z",
        [](const VectorXd& residuals, const Eigen::MatrixX2d& points, double range,
           const std::string& family, Index max_exact_n, std::uint64_t seed) {
          const McReport r = residual_mc_z(residuals, make_coords(points), make_kernel(family, range),
                                           McOptions{max_exact_n, seed});
          py::dict d;
          d["mc"] = r.mc;
          d["expected"] = r.expected;
          d["variance"] = r.variance;
          d["z"] = r.z;
          d["n_used"] = r.n_used;
          d["subsampled"] = r.subsampled;
          return d;
        },
        py::arg("residuals"), py::arg("points"), py::arg("range"), py::arg("family") = "exp",
        py::arg("max_exact_n") = 10000, py::arg("seed") = 0);

  m.def("analytic_grid_eigenvalues", &analytic_grid_eigenvalues, py::arg("grid_side"),
        py::arg("range") = default_grid_range());
  m.def("contribution_lower_bound", &contribution_lower_bound, py::arg("grid_side"),
        py::arg("range"), py::arg("count"));

  m.def("simulate",
        [](Index n, double sigma_gamma, double sigma_gamma_x, double alpha, double r_mult,
           std::uint64_t seed) {
          SimConfig c;
          c.n = n;
          c.sigma_gamma = sigma_gamma;
          c.sigma_gamma_x = sigma_gamma_x;
          c.alpha_true = alpha;
          c.r_mult = r_mult;
          c.estimators = {{EstimatorKind::Lm, 0}};
          c.validate();
          const SimulatedData d = simulate_dataset(c, seed);
          py::dict out;
          out["points"] = Eigen::MatrixX2d(d.coords.points());
          out["x"] = d.x;
          out["y"] = d.y;
          out["range"] = d.range;
          return out;
        },
        py::arg("n"), py::arg("sigma_gamma") = 1.0, py::arg("sigma_gamma_x") = 0.0,
        py::arg("alpha") = 1.0, py::arg("r_mult") = 1.0, py::arg("seed") = 1);
}

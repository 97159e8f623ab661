#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>

#include <CLI11.hpp>

#include "openrg/bethe.hpp"
#include "openrg/cli.hpp"
#include "openrg/errors.hpp"

namespace openrg::cli {

namespace {

std::string timestamp(bool fixed) {
  if (fixed) return "1970-01-01T00:00:00Z";
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json config_json(const RunConfig& c) {
  Json model;
  model["L"] = c.model.length;
  model["z"] = c.model.z;
  model["G"] = c.model.G;
  model["Gamma"] = c.model.Gamma;
  Json boundary = nullptr;
  if (c.boundary) {
    const EtaExpansion& e = *c.boundary;
    boundary = Json::object();
    boundary["xi"] = complex_json(e.xi);
    boundary["psi"] = complex_json(e.psi);
    boundary["phi"] = complex_json(e.phi);
    boundary["alpha"] = complex_json(e.alpha);
    boundary["beta"] = complex_json(e.beta);
    boundary["gamma"] = complex_json(e.gamma);
    boundary["delta"] = complex_json(e.delta);
    boundary["lambda"] = complex_json(e.lambda);
    boundary["mu"] = complex_json(e.mu);
  }
  // Output paths are left out so that reports written to different files
  // compare equal.
  const RunSettings& r = c.run;
  Json run;
  run["cap"] = r.cap;
  run["tol"] = r.tolerance;
  run["residual_tol"] = r.residual_tolerance;
  if (r.command == "verify") {
    run["samples"] = r.samples;
    run["eta"] = complex_json(r.eta);
    run["corrupt_r"] = r.corrupt_r;
  } else if (r.command == "spectrum") {
    run["sector_fallback"] = r.sector_fallback;
  } else if (r.command == "solve") {
    run["method"] = r.method;
    run["gamma_path"] = r.gamma_path;
    run["state"] = r.state;
  }
  Json out;
  out["model"] = std::move(model);
  out["boundary"] = std::move(boundary);
  out["run"] = std::move(run);
  return out;
}

Json header(const RunConfig& c) {
  Json h;
  h["tool"] = "openrg";
  h["version"] = kVersion;
  h["command"] = c.run.command;
  h["seed"] = c.run.seed;
  h["generated_at"] = timestamp(c.run.fixed_clock);
  h["config"] = config_json(c);
  return h;
}

Json roots_json(const BetheRoots& roots) {
  Json inverse = Json::array(), squared = Json::array();
  for (Eigen::Index i = 0; i < roots.inverse.size(); ++i) {
    inverse.push_back(complex_json(roots.inverse(i)));
    squared.push_back(roots.at_infinity[i] ? Json(nullptr) : complex_json(roots.squared(i)));
  }
  Json j;
  j["inverse"] = std::move(inverse);
  j["squared"] = std::move(squared);
  j["finite"] = roots.finite_count();
  j["source"] = to_string(roots.source);
  return j;
}

BetheRoots roots_from_json(const Json& j, int length) {
  const Json& inv = j.at("inverse");
  if (!inv.is_array() || static_cast<int>(inv.size()) != length) {
    throw ConfigError("seed roots must list " + std::to_string(length) + " inverse roots");
  }
  CVector y(length);
  for (int i = 0; i < length; ++i) y(i) = Complex(inv[i].at("re").get<double>(), inv[i].at("im").get<double>());
  if (!y.allFinite()) throw ConfigError("seed roots must be finite");
  return BetheRoots::from_inverse(y);
}

Json row_json(const std::string& name, double residual, double threshold, bool pass, const std::string& note = "") {
  Json row;
  row["name"] = name;
  row["residual"] = residual;
  row["threshold"] = threshold;
  row["pass"] = pass;
  if (!note.empty()) row["note"] = note;
  return row;
}

/// A spectral point at least `gap` away from 0, +-eps_j and eta.
Complex sample_point(std::mt19937_64& rng, const ChainSpec& chain, double gap = 0.05) {
  std::uniform_real_distribution<double> box(-2.0, 2.0);
  for (;;) {
    const Complex u(box(rng), box(rng));
    bool ok = std::abs(u) > gap && std::abs(u - chain.eta) > gap;
    for (Complex e : chain.eps) ok = ok && std::abs(u - e) > gap && std::abs(u + e) > gap;
    if (ok) return u;
  }
}

double max_abs_residual(const CVector& r) { return r.size() ? r.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

CommandResult cmd_verify(const RunConfig& c) {
  const ModelParams& p = c.model;
  const EtaExpansion ep = c.expansion();
  const ChainSpec chain = p.chain(c.run.eta);
  const ChainSpec chain0 = p.chain();

  std::mt19937_64 rng(c.run.seed);
  std::vector<std::pair<Complex, Complex>> samples;
  for (int i = 0; i < c.run.samples; ++i) {
    const Complex u = sample_point(rng, chain);
    samples.emplace_back(u, sample_point(rng, chain));
  }
  StructureOptions so;
  so.r_perturbation = c.run.corrupt_r;
  const StructureReport structure = structure_report(chain, ep.at(c.run.eta), samples, so);

  Json rows = Json::array();
  bool pass = true;
  for (const auto& row : structure.rows) rows.push_back(row_json(row.name, row.residual, row.threshold, row.pass));
  pass = structure.pass;

  auto add = [&](const std::string& name, double threshold, const std::function<double()>& compute) {
    double residual = std::numeric_limits<double>::infinity();
    std::string note;
    try {
      residual = compute();
    } catch (const std::exception& err) {
      note = err.what();
    }
    const bool ok = std::isfinite(residual) && residual < threshold;
    pass = pass && ok;
    rows.push_back(row_json(name, residual, threshold, ok, note));
  };

  const ManyBodyOperator H = hamiltonian(p);
  std::vector<ManyBodyOperator> taus;
  for (int j = 1; j <= p.length; ++j) taus.push_back(tau_star(j, p));

  add("tau_commutators", 1e-10, [&] {
    double worst = 0.0;
    for (int j = 0; j < p.length; ++j) {
      for (int k = j + 1; k < p.length; ++k) worst = std::max(worst, relative_commutator(taus[j].matrix, taus[k].matrix));
    }
    return worst;
  });
  add("hamiltonian_commutators", 1e-10, [&] {
    double worst = 0.0;
    for (const auto& t : taus) worst = std::max(worst, relative_commutator(H.matrix, t.matrix));
    return worst;
  });
  add("sum_rule", 1e-12, [&] {
    CMatrix sum = CMatrix::Zero(H.dim(), H.dim());
    for (int j = 0; j < p.length; ++j) sum += p.z[j] * p.z[j] * taus[j].matrix;
    return relative_difference(2.0 * p.alpha() * H.matrix, sum);
  });
  add("second_family", 1e-12, [&] {
    double worst = 0.0;
    for (int j = 1; j <= p.length; ++j) {
      const CMatrix second = tau_general(j, chain0.negated(), ep.swapped()).matrix.transpose();
      worst = std::max(worst, relative_difference(second, -tau_general(j, chain0, ep).matrix));
    }
    return worst;
  });

  EtaExpansion diag = ep;
  diag.psi = diag.phi = diag.delta = diag.mu = 0.0;
  const DiagonalBoundary b{diag.xi, diag.alpha + diag.beta, diag.gamma, diag.lambda};
  const std::vector<Complex>& e = chain0.eps;
  add("semi_diagonal", 1e-12, [&] {
    double worst = 0.0;
    for (int j = 1; j <= p.length; ++j) {
      const Complex x = e[j - 1];
      const CMatrix lhs = x * tau_general(j, chain0, diag).matrix / ((x - diag.xi) * (x + diag.xi));
      worst = std::max(worst, relative_difference(lhs, tau_semi_diagonal(j, e, b).matrix));
    }
    return worst;
  });
  add("gauge_stage1", 1e-12, [&] {
    double worst = 0.0;
    for (int j = 1; j <= p.length; ++j) {
      const CMatrix semi = tau_semi_diagonal(j, e, b).matrix;
      const CMatrix rest = semi - tau_gauge_stage1(j, e, b).matrix;
      worst = std::max(worst, (rest - rest(0, 0) * CMatrix::Identity(rest.rows(), rest.cols())).norm() / semi.norm());
    }
    return worst;
  });
  add("gauge_stage2", 1e-12, [&] {
    double worst = 0.0;
    for (int j = 1; j <= p.length; ++j) {
      worst = std::max(worst, relative_difference(gauge_transform(tau_gauge_stage1(j, e, b), b.xi, e).matrix,
                                                  tau_gauge_stage2(j, e, b).matrix));
    }
    return worst;
  });
  add("gauge_stage3", 1e-12, [&] {
    std::vector<Complex> shifted;
    for (Complex x : e) shifted.push_back(std::sqrt(x * x + b.xi * b.xi));
    double worst = 0.0;
    for (int j = 1; j <= p.length; ++j) {
      worst = std::max(worst, relative_difference(tau_gauge_stage3(j, shifted, b).matrix,
                                                  tau_star(j, e, b.alpha, b.gamma, b.lambda).matrix));
    }
    return worst;
  });
  if (p.length <= 3) {
    add("quasi_classical", 1e-5, [&] {
      double worst = 0.0;
      for (int j = 1; j <= p.length; ++j) {
        worst = std::max(worst, quasiclassical_check(j, e, ep, {1e-2, 5e-3}).residual);
      }
      return worst;
    });
  }

  CommandResult result;
  result.report["header"] = header(c);
  result.report["identities"] = std::move(rows);
  result.report["pass"] = pass;
  result.exit_code = pass ? kPass : kNumericalFailure;
  return result;
}

CommandResult cmd_spectrum(const RunConfig& c) {
  SpectrumMatchOptions o;
  o.seed = c.run.seed;
  o.tolerance = c.run.tolerance;
  o.residual_tolerance = c.run.residual_tolerance;
  o.cap = c.run.cap;
  const SpectrumMatchReport m = spectrum_match(c.model, o);

  Json diagnostics = Json::array();
  if (m.sector_mode && !c.run.sector_fallback) {
    const std::string warning =
        "warning: Gamma = 0 conserves total S^z; reconstruction ran sector by sector "
        "(set sector_fallback = true to silence)";
    std::cerr << warning << '\n';
    diagnostics.push_back(warning);
  }
  for (const auto& d : m.diagnostics) diagnostics.push_back(d);

  Json records = Json::array();
  char line[256];
  std::string csv = "index,E_ED,E_Bethe_re,E_Bethe_im,dE,residual\n";
  for (const auto& r : m.records) {
    Json j;
    j["index"] = r.index;
    j["energy_ed"] = r.energy_ed;
    j["energy_bethe"] = complex_json(r.energy_bethe);
    j["abs_error"] = r.abs_error;
    j["rel_error"] = r.rel_error;
    j["bae_residual"] = r.bae_residual;
    j["finite_roots"] = r.finite_roots;
    j["condition"] = r.condition;
    j["matched"] = r.matched;
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
    Json lam = Json::array();
    for (Eigen::Index k = 0; k < r.lambda_star.size(); ++k) lam.push_back(complex_json(r.lambda_star(k)));
    j["lambda_star"] = std::move(lam);
    j["roots"] = roots_json(r.roots);
    records.push_back(std::move(j));
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.index, r.energy_ed,
                  r.energy_bethe.real(), r.energy_bethe.imag(), r.abs_error, r.bae_residual);
    csv += line;
  }

  const bool pass = m.all_matched() && m.max_rel_error < c.run.tolerance && m.max_residual < c.run.residual_tolerance;
  Json summary;
  summary["states"] = m.records.size();
  summary["matched"] = m.matched;
  summary["max_rel_error"] = m.max_rel_error;
  summary["max_residual"] = m.max_residual;
  summary["sector_mode"] = m.sector_mode;
  summary["pass"] = pass;

  CommandResult result;
  result.report["header"] = header(c);
  result.report["summary"] = std::move(summary);
  result.report["diagnostics"] = std::move(diagnostics);
  result.report["records"] = std::move(records);
  result.csv = std::move(csv);
  result.exit_code = pass ? kPass : kNumericalFailure;
  return result;
}

CommandResult cmd_solve(const RunConfig& c) {
  const ModelParams& p = c.model;
  const std::vector<double> path = c.run.gamma_path.empty() ? std::vector<double>{p.Gamma} : c.run.gamma_path;
  ModelParams start = p;
  start.Gamma = path.front();

  CommandResult result;
  result.report["header"] = header(c);
  Json diagnostics = Json::array();
  auto finish = [&](const std::string& status, int code) {
    result.report["status"] = status;
    result.report["diagnostics"] = diagnostics;
    result.exit_code = code;
    return result;
  };

  // Seeds: a prior report, or the requested ED state at the path start.
  BetheRoots seeds;
  Json seed_info;
  if (!c.run.seeds_from.empty()) {
    std::ifstream in(c.run.seeds_from);
    if (!in) throw ConfigError("cannot open seeds file '" + c.run.seeds_from + "'");
    Json prior;
    try {
      prior = Json::parse(in);
      if (prior.contains("records")) {
        const Json& recs = prior.at("records");
        if (c.run.state >= static_cast<int>(recs.size())) throw ConfigError("state index outside the seeds file");
        seeds = roots_from_json(recs.at(c.run.state).at("roots"), p.length);
      } else if (prior.contains("points") && !prior.at("points").empty()) {
        seeds = roots_from_json(prior.at("points").back().at("roots"), p.length);
      } else if (prior.contains("last_good")) {
        seeds = roots_from_json(prior.at("last_good").at("roots"), p.length);
      } else {
        throw ConfigError("seeds file holds neither records nor points");
      }
    } catch (const nlohmann::json::exception& err) {
      throw ConfigError(std::string("malformed seeds file: ") + err.what());
    }
    seed_info["source"] = "file";
  } else {
    SpectrumMatchOptions o;
    o.seed = c.run.seed;
    o.tolerance = c.run.tolerance;
    o.residual_tolerance = c.run.residual_tolerance;
    o.cap = c.run.cap;
    const SpectrumMatchReport m = spectrum_match(start, o);
    const MatchRecord& rec = m.records.at(c.run.state);
    seed_info["source"] = "spectrum";
    seed_info["energy_ed"] = rec.energy_ed;
    if (!rec.matched) {
      diagnostics.push_back("seed state " + std::to_string(c.run.state) + " could not be reconstructed: " +
                            rec.diagnostic);
      result.report["seeds"] = std::move(seed_info);
      return finish("failed", kNumericalFailure);
    }
    seeds = rec.roots;
  }
  seed_info["state"] = c.run.state;
  seed_info["roots"] = roots_json(seeds);
  result.report["seeds"] = std::move(seed_info);
  result.report["method"] = c.run.method;

  auto point_json = [&](double gamma, const BetheRoots& roots, Complex energy, bool has_energy) {
    ModelParams q = p;
    q.Gamma = gamma;
    Json j;
    j["Gamma"] = gamma;
    j["energy"] = has_energy ? complex_json(energy) : Json(nullptr);
    double res = std::numeric_limits<double>::infinity();
    try {
      res = max_abs_residual(bae_residual_y(roots, q));
    } catch (const DomainError&) {
    }
    j["bae_residual"] = res;
    j["roots"] = roots_json(roots);
    return std::make_pair(j, res);
  };

  Json points = Json::array();
  bool residual_ok = true;
  if (c.run.method == "continuation") {
    ContinuationOptions co;
    std::vector<ContinuationPoint> pts;
    try {
      pts = continuation_solve(p, path, seeds, co);
    } catch (const ContinuationError& err) {
      diagnostics.push_back(err.what());
      const ContinuationPoint& g = err.last_good();
      result.report["last_good"] = point_json(g.Gamma, g.roots, g.energy, !g.collided).first;
      result.report["points"] = std::move(points);
      return finish("failed", kNumericalFailure);
    }
    for (const auto& pt : pts) {
      auto [j, res] = point_json(pt.Gamma, pt.roots, pt.energy, !pt.collided);
      j["escaped"] = pt.escaped;
      j["collided"] = pt.collided;
      residual_ok = residual_ok && res < c.run.residual_tolerance;
      points.push_back(std::move(j));
    }
    result.report["points"] = points;
    if (!pts.empty() && pts.back().collided) {
      diagnostics.push_back("roots collided at Gamma = " + std::to_string(pts.back().Gamma) +
                            " after " + std::to_string(pts.size() - 1) + " of " + std::to_string(path.size() - 1) +
                            " path steps; tracking stopped");
      if (pts.size() > 1) result.report["last_good"] = points[points.size() - 2];
      return finish("collision", kNumericalFailure);
    }
  } else {
    BetheRoots current = seeds;
    for (double gamma : path) {
      ModelParams q = p;
      q.Gamma = gamma;
      try {
        if (current.finite_count() != current.size()) {
          throw DomainError("Heine-Stieltjes needs all roots finite");
        }
        const HeineStieltjesResult hs = heine_stieltjes_solve(q, QPolynomial::from_roots(current.squared));
        current = hs.roots;
        auto [j, res] = point_json(gamma, current, energy_from_roots(current, q).energy, true);
        j["coefficient_residual"] = hs.coefficient_residual;
        Json v = Json::array();
        for (Eigen::Index k = 0; k < hs.V.size(); ++k) v.push_back(complex_json(hs.V(k)));
        j["van_vleck"] = std::move(v);
        residual_ok = residual_ok && res < c.run.residual_tolerance;
        points.push_back(std::move(j));
      } catch (const std::exception& err) {
        diagnostics.push_back("Heine-Stieltjes solve failed at Gamma = " + std::to_string(gamma) + ": " + err.what());
        if (!points.empty()) result.report["last_good"] = points.back();
        result.report["points"] = std::move(points);
        return finish("failed", kNumericalFailure);
      }
    }
    result.report["points"] = points;
  }
  if (!residual_ok) {
    diagnostics.push_back("Bethe residual above residual_tol along the path");
    return finish("failed", kNumericalFailure);
  }
  return finish("ok", kPass);
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Integrable p+ip pairing model with an environment: identity checks, Bethe-vs-ED "
               "spectra and Bethe root tracking.",
               "openrg"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, out;
  std::uint64_t seed = 0;
  double tol = 0.0;
  bool fixed_clock = false;
  app.add_option("--config", config_path, "TOML-style run configuration");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides [run] seed)");
  auto* tol_opt = app.add_option("--tol", tol, "relative energy tolerance (overrides [run] tol)");
  auto* out_opt = app.add_option("--out", out, "report path; stdout when omitted");
  app.add_flag("--fixed-clock", fixed_clock, "write a constant timestamp");

  app.add_subcommand("verify", "algebraic and operator identity suite")->fallthrough();
  app.add_subcommand("spectrum", "match every ED eigenstate with Bethe roots")->fallthrough();
  app.add_subcommand("solve", "track Bethe roots along a Gamma path")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    RunConfig c = config_path.empty() ? default_config() : load_config(config_path);
    c.run.command = app.get_subcommands().front()->get_name();
    if (*seed_opt) c.run.seed = seed;
    if (*tol_opt) c.run.tolerance = tol;
    if (*out_opt) c.run.out = out;
    c.run.fixed_clock = c.run.fixed_clock || fixed_clock;
    validate(c);

    CommandResult r;
    if (c.run.command == "verify") {
      r = cmd_verify(c);
    } else if (c.run.command == "spectrum") {
      r = cmd_spectrum(c);
    } else {
      r = cmd_solve(c);
    }
    const std::string text = dump_json(r.report);
    if (c.run.out.empty()) {
      std::cout << text;
    } else {
      write_atomically(c.run.out, text);
    }
    if (!c.run.csv.empty() && !r.csv.empty()) write_atomically(c.run.csv, r.csv);
    if (r.exit_code != kPass) std::cerr << "openrg " << c.run.command << ": checks failed\n";
    return r.exit_code;
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kConfigError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kNumericalFailure;
  }
}

}  // namespace openrg::cli

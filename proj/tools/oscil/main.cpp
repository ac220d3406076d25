// oscil: command-line front end for the benchmark harness.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oscil/oscil.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

/// Rewrites argv so that `key=value` lines of a --config file become flags
/// placed right after the subcommand; later flags on the command line win.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::optional<std::string> path;
  std::vector<std::string> rest;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return args;
  if (rest.empty()) throw CLI::ValidationError("--config", "a subcommand must be given");
  const std::string& sub = rest.front();
  const std::vector<CLI::ConfigItem> items = CLI::ConfigBase{}.from_file(*path);
  std::vector<std::string> out{args[0], sub};
  for (const CLI::ConfigItem& item : items) {
    if (item.name.empty() || item.name.front() == '+' || item.name.front() == '-') continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents.front() == sub)) continue;
    out.push_back("--" + item.name);
    out.insert(out.end(), item.inputs.begin(), item.inputs.end());
  }
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

void write_to(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw CLI::FileError(path + ": cannot open for writing");
  body(os);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral HBVM benchmarks for highly oscillatory Hamiltonian problems"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "key=value file; command-line flags override it");

  oscil::RunConfig cfg;
  std::string omega = "auto";
  auto* solve = app.add_subcommand("solve", "run one problem/method/N and print a CSV row");
  solve->add_option("--problem", cfg.problem, "duffing | fpu | nls")->required();
  solve->add_option("--method", cfg.method, "sv | gautschi | deuflhard | gauss-<s> | shbvm")->required();
  solve->add_option("--steps", cfg.N, "number of steps N")->required()->check(CLI::PositiveNumber);
  solve->add_option("--t-end", cfg.t_end, "final time (default: 20 duffing, 10 fpu, 5 nls)")
      ->check(CLI::PositiveNumber);
  solve->add_option("--nu", cfg.nu, "ansatz degree")->check(CLI::Range(1.0, 1e6));
  solve->add_option("--omega", omega, "frequency estimate, or auto");
  solve->add_option("--u", cfg.u, "unit roundoff used by the truncation criteria")->check(CLI::Range(0.0, 1.0));
  solve->add_option("--out", cfg.out_path, "output file (default stdout)");

  std::string table_id, scale = "desk", out_dir;
  auto* table = app.add_subcommand("table", "reproduce one results table");
  table->add_option("--id", table_id, "table id")->required();
  table->add_option("--scale", scale, "desk | full")->check(CLI::IsMember({"desk", "full"}));
  table->add_option("--out-dir", out_dir, "write <id>_<method>.csv files here instead of stdout");

  std::string figure_id, figure_out;
  double figure_u = oscil::kUnitRoundoff;
  auto* figure = app.add_subcommand("figure", "emit the data of one figure");
  figure->add_option("--id", figure_id, "g-bound | phi-u | time-vs-N")->required();
  figure->add_option("--u", figure_u, "unit roundoff")->check(CLI::Range(0.0, 1.0));
  figure->add_option("--out", figure_out, "output file (default stdout)");

  double omega_h = 0.0, params_nu = 1.0, params_u = oscil::kUnitRoundoff;
  auto* params = app.add_subcommand("params", "print (s0, s, k) for omega*h and nu");
  params->add_option("--omega-h", omega_h, "omega*h")->required()->check(CLI::PositiveNumber);
  params->add_option("--nu", params_nu, "ansatz degree")->check(CLI::Range(1.0, 1e6));
  params->add_option("--u", params_u, "unit roundoff")->check(CLI::Range(0.0, 1.0));

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::vector<const char*> cargs;
    for (const std::string& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (solve->parsed()) {
      if (omega != "auto") {
        try {
          cfg.omega = std::stod(omega);
        } catch (const std::exception&) {
          std::cerr << "--omega must be a number or auto\n";
          return kExitUsage;
        }
        if (!(*cfg.omega > 0.0)) {
          std::cerr << "--omega must be positive\n";
          return kExitUsage;
        }
      }
      const oscil::BenchRecord rec = oscil::run_solve(cfg);
      write_to(cfg.out_path, [&](std::ostream& os) {
        oscil::write_csv_header(os);
        oscil::write_csv_row(os, rec);
      });
      std::cerr << "e_y=" << oscil::format_real(rec.e_y) << " e_H_abs=" << oscil::format_real(rec.e_H_abs) << '\n';
    } else if (table->parsed()) {
      const auto blocks = oscil::run_table(table_id, scale == "full", [](const oscil::BenchRecord& r) {
        std::cerr << r.method << " N=" << r.N << " done in " << oscil::format_real(r.wall_time_s) << " s\n";
      });
      for (const auto& b : blocks)
        for (const auto& r : b.rows)
          if (r.rate_generalized && r.rate_q)
            std::cerr << "note: " << b.method << " N=" << r.N << " rate is log(e1/e2)/log(N2/N1)\n";
      if (out_dir.empty()) {
        oscil::write_table(std::cout, blocks);
      } else {
        for (const auto& b : blocks) {
          write_to(out_dir + "/" + table_id + "_" + b.method + ".csv", [&](std::ostream& os) {
            oscil::write_csv_header(os);
            for (const auto& r : b.rows) oscil::write_csv_row(os, r);
          });
        }
      }
    } else if (figure->parsed()) {
      write_to(figure_out, [&](std::ostream& os) { oscil::run_figure(figure_id, os, figure_u); });
    } else if (params->parsed()) {
      oscil::params_command(omega_h, params_nu, std::cout, params_u);
    }
  } catch (const oscil::Error& e) {
    std::cerr << "oscil: " << e.what() << '\n';
    switch (e.kind()) {
      case oscil::ErrorKind::UnknownProblem:
      case oscil::ErrorKind::UnknownMethod:
      case oscil::ErrorKind::UnknownTable:
      case oscil::ErrorKind::UnknownFigure:
        return kExitUsage;
      case oscil::ErrorKind::NoConvergence:
      case oscil::ErrorKind::NonFiniteEvaluation:
      case oscil::ErrorKind::SolverDiverged:
        return kExitDiverged;
      default:
        return 1;
    }
  } catch (const CLI::FileError& e) {
    std::cerr << "oscil: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

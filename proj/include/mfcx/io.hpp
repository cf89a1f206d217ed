#pragma once
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfcx/liquidation.hpp"
#include "mfcx/lq.hpp"
#include "mfcx/transport/cost.hpp"
#include "mfcx/transport/coupling.hpp"
#include "mfcx/transport/lattice.hpp"
#include "mfcx/transport/solver.hpp"

namespace mfcx {

// Config rejection carrying the JSON pointer of the offending field.
struct ConfigError : std::runtime_error {
  ConfigError(std::string pointer_, const std::string& what_);
  std::string pointer;
};

nlohmann::json load_json_file(const std::string& path);

// Parsers validate schema (required keys present, unknown keys rejected)
// and domain invariants via the target type's validate().
LiquidationParams liquidation_params_from_json(const nlohmann::json& j,
                                               const std::string& ptr = "/model");
nlohmann::json to_json(const LiquidationParams& p);

Q0Spec q0spec_from_json(const nlohmann::json& j, const std::string& ptr = "/q0");
nlohmann::json to_json(const Q0Spec& q);

LQParams lq_params_from_json(const nlohmann::json& j, const std::string& ptr = "/model");
nlohmann::json to_json(const LQParams& p);

transport::CostSpec cost_spec_from_json(const nlohmann::json& j,
                                        const std::string& ptr = "/cost");

struct TransportInstance {
  int n = 0;  // quantization level (ladder: the finest rung)
  int m = 5;  // atoms per increment
  double T = 1.0;
  double x0 = 0.0;
  transport::ActionLattice lattice;
  transport::CostSpec cost;
  transport::SolveOptions solver;
  std::optional<double> reference;  // explicit, or analytic for type "quadratic"
  // single-level solves/lifts only: use the step law of a ladder whose
  // finest rung is this level, i.e. the convolution-refined tree
  std::optional<int> family_n_max;
};

TransportInstance transport_instance_from_json(const nlohmann::json& j,
                                               const std::string& ptr = "/instance");
nlohmann::json to_json(const TransportInstance& inst, const nlohmann::json& cost_json);

// Shortest round-trip decimal form; locale-independent, so equal seeds
// give byte-identical files.
std::string format_double(double v);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void write_json_file(const std::string& path, const nlohmann::json& j);

std::uint64_t fnv1a(const std::string& bytes);
std::string config_hash(const nlohmann::json& config);  // 16 hex chars

// Manifest lifecycle: written with complete=false before any result
// file, rewritten with complete=true as the last act of a run.
nlohmann::json make_manifest(const std::string& subcommand, const nlohmann::json& config,
                             std::uint64_t seed);
void write_manifest(const std::string& out_dir, const nlohmann::json& manifest);

void write_ladder_csv(const std::string& path, const transport::LadderResult& lr);
nlohmann::json ladder_to_json(const transport::LadderResult& lr);

// Kernel tables P(action | step, revealed x node, running action sum)
// for policy mixtures; deterministic tree policies dump their per-prefix
// action arrays instead. Tables above entry_cap are replaced by the
// block rate and terminal moment laws with "truncated": true.
nlohmann::json coupling_to_json(const transport::DiscreteCausalCoupling& c,
                                std::size_t entry_cap = 1'000'000);

}  // namespace mfcx

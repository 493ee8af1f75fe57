#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smolu/kernel.hpp"
#include "smolu/profile.hpp"
#include "smolu/selfsim.hpp"
#include "smolu/transform.hpp"

namespace smolu {

struct CheckEntry {
  std::string check_id;
  /// the inequality in words
  std::string lemma_ref;
  double measured = 0.0;
  /// empty for reported-only checks
  std::optional<double> bound;
  std::optional<bool> pass;
  std::string note;
};

class VerificationReport {
 public:
  /// Throws std::invalid_argument on a duplicate check_id.
  void add(CheckEntry e);
  void merge(const VerificationReport& other);
  const std::vector<CheckEntry>& entries() const { return entries_; }
  const CheckEntry* find(const std::string& id) const;
  /// false if any entry with a pass flag failed
  bool passed() const;

  nlohmann::ordered_json environment;

  /// Entries sorted by check_id, then the environment. Same input, same bytes.
  std::string to_json() const;

 private:
  std::vector<CheckEntry> entries_;
};

struct EstimateSettings {
  SingularitySettings singularity;
  /// dyadic rho range of the regularity fit
  double rho_lo = 1e-4;
  double rho_hi = 1e-2;
  /// tail fit window as fractions of x_max
  double decay_lo = 0.25;
  double decay_hi = 1.0;
  std::vector<double> gammas = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double moment_A = 2.0;
  std::vector<double> gap = {1e-1, 1e-2, 1e-3};
  /// U reconstruction on the dense q grid (817 M evaluations)
  bool reconstruct_u = true;
};

/// Estimate ledger for one profile. (f1), (f2), regularity, decay and moments
/// use the mass-1 profile; (f3), (f4), (f5), the g-estimates and the transform
/// invariants use its rescaling to a unit singularity. Failures become entries.
VerificationReport run_estimates(const Profile& p, const CoagulationKernel& k, const EstimateSettings& s = {});

/// M(gamma)^{1/gamma} <= gamma e^A per gamma (mass-1 p), plus the least A that works.
VerificationReport check_moment_bound(const Profile& p, const std::vector<double>& gammas, double A = 2.0);

/// Estimates for g(X) = e^x f(x), X = (1+q_n) x, on a unit-singularity profile, one
/// set of entries per 1+q_n in `gap`, and log-log slopes against the expected powers.
/// Throws IntegrabilityError if the tail rate is below 1.
VerificationReport check_g_estimates(const Profile& p, double alpha, const std::vector<double>& gap = {1e-1, 1e-2, 1e-3});

/// x -> a f(a x) with a = 1/tail_rate, which puts the singularity of Q at -1.
/// A profile without an exponential tail is returned unchanged.
Profile unit_tail_frame(const Profile& p);

/// ||Q(T p1) - Q(T p2)|| / ||Q(p1) - Q(p2)|| with T = normalize_mass o apply_map and every
/// profile moved to unit_tail_frame before its transform is taken.
/// Throws ZeroDistanceError when the inputs coincide in the norm.
double contraction_probe(const CoagulationKernel& k, const Profile& p1, const Profile& p2);

struct ScanRow {
  double eps = 0.0;
  double delta = 0.0;   // ||Q - Qbar||
  double sup_nu = 0.0;  // sup over q > -1 + nu of |Q - Qbar|
  double q_star = 0.0;  // singularity of the mass-1 profile
  bool converged = false;
  std::size_t iterations = 0;
  std::string error;
};

struct ScanSettings {
  double alpha = 1.0 / 3.0;
  double nu = 0.1;
  std::string seed = "exp";
  SolveSettings solve;
};

/// Solves power(eps, alpha) for each eps and measures the distance to Qbar at unit
/// singularity. Solver failures are recorded in the row.
std::vector<ScanRow> qclose_scan(const std::vector<double>& eps_list, const ScanSettings& s = {});
std::vector<ScanRow> qclose_scan(const std::vector<double>& eps_list, const ScanSettings& s, const Grid& grid);
/// eps,delta,sup_nu,q_star,converged,iterations,error
std::string scan_csv(const std::vector<ScanRow>& rows);

}  // namespace smolu

#pragma once

// JSON documents (schema-versioned) and RFC 4180 CSV tables for every
// artifact the command-line tool writes.

#include <string>
#include <vector>

#include "json.hpp"
#include "lpflow/config.hpp"
#include "lpflow/dissipative.hpp"
#include "lpflow/linpoincare.hpp"
#include "lpflow/periodic.hpp"
#include "lpflow/splitting.hpp"
#include "lpflow/surgery.hpp"

namespace lpflow {

inline constexpr const char* kSchemaVersion = "lpflow/1";

using Json = nlohmann::ordered_json;

Json to_json(const Vec3& v);
Json to_json(const Mat2& m);  // row-major
Json to_json(const Mat3& m);  // row-major
Json to_json(std::complex<double> z);
Json to_json(const NormalFrame& f);
Json to_json(const NormalCocycle& c);
Json to_json(const PeriodicOrbit& o);
Json to_json(const OrbitCatalog& c);
Json to_json(const RegionApprox& r, bool with_samples = false);
Json to_json(const Margin& m);
Json to_json(const SplittingCertificate& c);
Json to_json(const BasinEstimate& b);
Json to_json(const std::vector<TrappedRow>& rows);
Json to_json(const AttractorVerdict& v);
Json to_json(const Inequality& i);
Json to_json(const SinkReport& r);
Json to_json(const PerturbationBudget& b);
Json to_json(const PerturbedCocycle& p);
Json to_json(const DeterminantDiscrepancy& d);

/// Wraps a payload with the schema tag and document kind.
Json document(const std::string& kind, Json payload);

/// Minimal CSV table with RFC 4180 quoting.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add(std::vector<std::string> row);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

  static std::string quote(const std::string& field);
  /// Shortest text that reads back to the same double.
  static std::string num(double v);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

CsvTable catalog_csv(const OrbitCatalog& c);
CsvTable basin_csv(const BasinEstimate& b);
CsvTable trapped_csv(const std::vector<TrappedRow>& rows);

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace lpflow

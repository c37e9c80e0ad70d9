#include "json.hpp"

#include "eitgate/analysis.hpp"

namespace eitgate {

std::string report_json(const Report& report, int indent) {
  nlohmann::json j;
  j["protocol"] = report.protocol;
  j["parameters"] = report.parameters;
  j["fidelity"] = report.fidelity;
  j["populations"] = report.populations;
  j["coherence"] = report.coherence;
  j["loss"] = report.loss;
  if (!report.info.empty()) j["info"] = report.info;
  return j.dump(indent) + "\n";
}

}  // namespace eitgate

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carbonsum/providers.hpp"

namespace carbonsum {

enum class MeterKind { StaticTable, SoftwareCounter, ExternalLog };

std::string to_string(MeterKind kind);

struct EnergyMeterSpec {
    MeterKind kind = MeterKind::StaticTable;
    /// static-table: model name -> kgCO2 per probe.
    std::map<std::string, double> static_costs;
    /// software-counter parameters.
    double average_power_watts = 0.0;
    double carbon_intensity_kg_per_kwh = 0.475;
    /// external-log: file the external meter appends "kg_co2[,seconds]" lines to.
    std::string log_path;
};

/// "static-table,file=costs.csv" | "software-counter,watts=50,intensity=0.475"
/// | "external-log,path=emissions.log"
EnergyMeterSpec parse_meter_spec(const std::string& text);

struct EmissionSample {
    double kg_co2 = 0.0;
    double duration_seconds = 0.0;
    std::string model_name;
    std::string probe;  // descriptor of prompt_fix digest and k
};

struct CostRow {
    std::string model_name;
    double params_billions = 0.0;
    double kg_co2_per_probe = 0.0;
    std::string note;  // e.g. "suspect" for dubious published values
};

struct CostTable {
    std::vector<CostRow> rows;
    std::optional<CostRow> lookup(const std::string& model_name) const;
};

/// CSV rows: model_name,params_billions,kg_co2_per_probe[,note]
CostTable load_cost_table(const std::string& path);

/// One constrained generation of at most k tokens from the fixed prompt,
/// with the emission attributed to that window. Probes are globally
/// serialized; a concurrent probe is an error. Static-table meters are a
/// pure lookup and issue no generation.
EmissionSample measure_generation_emission(Provider& provider, const EnergyMeterSpec& meter,
                                           const std::string& prompt_fix, int k = 10);

/// Linear parameter-count scaling of a measured cost.
double estimate_scaled_cost(double base_cost, double base_params_billions,
                            double target_params_billions);

/// C = E * D.
double total_cost(double e_kg_co2, double dataset_size);

/// watts * seconds at the given grid intensity (kgCO2 per kWh).
double energy_to_co2(double watts, double seconds, double intensity_kg_per_kwh);

/// The default fixed probe prompt: the summarization template rendered
/// with topic "climate change" and a fixed 200-character passage.
const std::string& default_probe_prompt();

}  // namespace carbonsum

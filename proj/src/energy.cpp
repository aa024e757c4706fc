#include "carbonsum/energy.hpp"

#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "carbonsum/summarizer.hpp"
#include "carbonsum/util.hpp"

namespace carbonsum {

namespace {

// Exactly 200 characters; the probe isolates architectural cost from
// output length, so the prompt must be identical for every system.
constexpr const char* kProbePassage =
    "Global surface temperature has risen faster since 1970 than in any other fifty-year "
    "period over at least the past two thousand years, and each of the last four decades "
    "has been warmer than any before.";

std::mutex g_probe_mutex;

}  // namespace

std::string to_string(MeterKind kind) {
    switch (kind) {
        case MeterKind::StaticTable: return "static-table";
        case MeterKind::SoftwareCounter: return "software-counter";
        case MeterKind::ExternalLog: return "external-log";
    }
    return "?";
}

EnergyMeterSpec parse_meter_spec(const std::string& text) {
    EnergyMeterSpec spec;
    std::stringstream ss(text);
    std::string piece;
    bool first = true;
    while (std::getline(ss, piece, ',')) {
        piece = trim(piece);
        if (piece.empty()) continue;
        if (first) {
            if (piece == "static-table") spec.kind = MeterKind::StaticTable;
            else if (piece == "software-counter") spec.kind = MeterKind::SoftwareCounter;
            else if (piece == "external-log") spec.kind = MeterKind::ExternalLog;
            else throw std::invalid_argument("unknown meter kind: \"" + piece + "\"");
            first = false;
            continue;
        }
        auto eq = piece.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("meter spec: expected key=value, got \"" + piece + "\"");
        std::string key = trim(piece.substr(0, eq));
        std::string value = trim(piece.substr(eq + 1));
        if (key == "file") {
            for (const auto& row : load_cost_table(value).rows)
                spec.static_costs[row.model_name] = row.kg_co2_per_probe;
        } else if (key == "watts") {
            spec.average_power_watts = std::stod(value);
        } else if (key == "intensity") {
            spec.carbon_intensity_kg_per_kwh = std::stod(value);
        } else if (key == "path") {
            spec.log_path = value;
        } else {
            throw std::invalid_argument("meter spec: unknown key \"" + key + "\"");
        }
    }
    if (first) throw std::invalid_argument("meter spec is empty");
    if (spec.average_power_watts < 0 || spec.carbon_intensity_kg_per_kwh < 0)
        throw std::invalid_argument("meter spec: magnitudes must be >= 0");
    return spec;
}

std::optional<CostRow> CostTable::lookup(const std::string& model_name) const {
    for (const auto& row : rows)
        if (row.model_name == model_name) return row;
    return std::nullopt;
}

CostTable load_cost_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cost table: " + path);
    CostTable table;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (stripped.rfind("model_name", 0) == 0) continue;  // header
        std::stringstream row(stripped);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(trim(cell));
        if (cells.size() < 3)
            throw std::runtime_error("cost table " + path + ": line " + std::to_string(lineno) +
                                     " has " + std::to_string(cells.size()) +
                                     " fields, expected model_name,params_billions,kg_co2_per_probe");
        CostRow parsed;
        parsed.model_name = cells[0];
        parsed.params_billions = std::stod(cells[1]);
        parsed.kg_co2_per_probe = std::stod(cells[2]);
        if (cells.size() > 3) parsed.note = cells[3];
        table.rows.push_back(std::move(parsed));
    }
    return table;
}

double energy_to_co2(double watts, double seconds, double intensity_kg_per_kwh) {
    if (watts < 0 || seconds < 0 || intensity_kg_per_kwh < 0)
        throw std::invalid_argument("energy_to_co2: magnitudes must be >= 0");
    double kwh = watts * seconds / 3600.0 / 1000.0;
    return kwh * intensity_kg_per_kwh;
}

EmissionSample measure_generation_emission(Provider& provider, const EnergyMeterSpec& meter,
                                           const std::string& prompt_fix, int k) {
    if (k < 1) throw std::invalid_argument("measure_generation_emission: k must be >= 1");
    if (prompt_fix.empty())
        throw std::invalid_argument("measure_generation_emission: prompt_fix is empty");

    EmissionSample sample;
    sample.model_name = provider.spec().model_name.empty() ? to_string(provider.spec().kind)
                                                           : provider.spec().model_name;
    sample.probe = "prompt_fix=" + fnv1a64_hex(prompt_fix) + ",k=" + std::to_string(k);

    if (meter.kind == MeterKind::StaticTable) {
        auto it = meter.static_costs.find(sample.model_name);
        if (it == meter.static_costs.end())
            throw std::runtime_error("static-table meter has no cost for model \"" +
                                     sample.model_name + "\"");
        sample.kg_co2 = it->second;
        return sample;
    }

    if (!provider.can_generate())
        throw std::invalid_argument("measure_generation_emission: provider cannot generate");

    std::unique_lock lock(g_probe_mutex, std::try_to_lock);
    if (!lock.owns_lock())
        throw std::runtime_error(
            "measure_generation_emission: concurrent probe detected; measurement windows "
            "must be exclusive");

    GenerationRequest request;
    request.prompt = prompt_fix;
    request.stop_after_tokens = k;

    auto t0 = std::chrono::steady_clock::now();
    GenerationResult result = provider.generate(request);
    auto t1 = std::chrono::steady_clock::now();
    double window = std::chrono::duration<double>(t1 - t0).count();
    sample.duration_seconds = result.wall_time_seconds > 0 ? result.wall_time_seconds : window;

    if (meter.kind == MeterKind::SoftwareCounter) {
        sample.kg_co2 = energy_to_co2(meter.average_power_watts, sample.duration_seconds,
                                      meter.carbon_intensity_kg_per_kwh);
        return sample;
    }

    // external-log: the tool running alongside appends the measurement.
    std::ifstream log(meter.log_path);
    if (!log)
        throw std::runtime_error("external-log meter: cannot open log " + meter.log_path);
    std::string line, last;
    while (std::getline(log, line)) {
        if (!trim(line).empty()) last = trim(line);
    }
    if (last.empty())
        throw std::runtime_error("external-log meter: log " + meter.log_path + " is empty");
    std::stringstream row(last);
    std::string cell;
    std::getline(row, cell, ',');
    sample.kg_co2 = std::stod(cell);
    if (std::getline(row, cell, ',')) sample.duration_seconds = std::stod(cell);
    if (sample.kg_co2 < 0)
        throw std::runtime_error("external-log meter: negative emission in " + meter.log_path);
    return sample;
}

double estimate_scaled_cost(double base_cost, double base_params_billions,
                            double target_params_billions) {
    if (base_cost <= 0 || base_params_billions <= 0 || target_params_billions <= 0)
        throw std::invalid_argument("estimate_scaled_cost: all arguments must be > 0");
    return base_cost * (target_params_billions / base_params_billions);
}

double total_cost(double e_kg_co2, double dataset_size) {
    if (e_kg_co2 < 0) throw std::invalid_argument("total_cost: E must be >= 0");
    if (dataset_size < 1) throw std::invalid_argument("total_cost: D must be >= 1");
    return e_kg_co2 * dataset_size;
}

const std::string& default_probe_prompt() {
    static const std::string prompt =
        render_prompt(PromptTemplate::defaults(), "climate change", kProbePassage);
    return prompt;
}

}  // namespace carbonsum

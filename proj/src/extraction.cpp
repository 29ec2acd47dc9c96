#include "dcsim/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <set>

#include <Eigen/Dense>

#include "csv.hpp"
#include "json_io.hpp"

namespace dcsim {

namespace {

using detail::parse_double;
using detail::parse_int;
using detail::split_fields;

[[noreturn]] void row_error(std::string_view file, std::size_t line, const std::string& what) {
    throw InputError(std::string(file) + " line " + std::to_string(line) + ": " + what);
}

double field_number(std::string_view file, std::size_t line, std::string_view text, std::string_view name) {
    auto v = parse_double(text);
    if (!v || !std::isfinite(*v)) row_error(file, line, "bad " + std::string(name) + " '" + std::string(text) + "'");
    return *v;
}

std::vector<MetricRecord> read_metrics(std::istream& in) {
    std::vector<MetricRecord> out;
    std::string line;
    std::size_t line_no = 0;
    if (!detail::next_line(in, line, line_no)) return out;
    if (detail::trim(line) != "timestamp_s,entity_kind,entity_id,metric,value")
        row_error("metrics", line_no, "unexpected header '" + line + "'");
    while (detail::next_line(in, line, line_no)) {
        const auto f = split_fields(line);
        if (f.size() != 5) row_error("metrics", line_no, "expected 5 fields, got " + std::to_string(f.size()));
        MetricRecord r;
        r.timestamp = field_number("metrics", line_no, f[0], "timestamp");
        if (f[1] == "server") r.kind = EntityKind::Server;
        else if (f[1] == "vm") r.kind = EntityKind::Vm;
        else row_error("metrics", line_no, "unknown entity kind '" + std::string(f[1]) + "'");
        if (f[2].empty()) row_error("metrics", line_no, "empty entity id");
        if (f[3].empty()) row_error("metrics", line_no, "empty metric name");
        r.entity_id = f[2];
        r.metric = f[3];
        r.value = field_number("metrics", line_no, f[4], "value");
        out.push_back(std::move(r));
    }
    return out;
}

std::optional<LifecycleEventKind> event_from_string(std::string_view s) {
    if (s == "submitted") return LifecycleEventKind::Submitted;
    if (s == "started") return LifecycleEventKind::Started;
    if (s == "migrated") return LifecycleEventKind::Migrated;
    if (s == "terminated") return LifecycleEventKind::Terminated;
    if (s == "completed") return LifecycleEventKind::Completed;
    return std::nullopt;
}

std::map<std::string, std::string> parse_parameters(std::string_view text, std::size_t line_no) {
    std::map<std::string, std::string> out;
    if (text.empty()) return out;
    for (auto item : split_fields(text, ';')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0) row_error("lifecycle", line_no, "bad parameter '" + std::string(item) + "'");
        out[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    }
    return out;
}

std::vector<LifecycleRecord> read_lifecycle(std::istream& in) {
    std::vector<LifecycleRecord> out;
    std::string line;
    std::size_t line_no = 0;
    if (!detail::next_line(in, line, line_no)) return out;
    const auto header = detail::trim(line);
    constexpr std::string_view base = "timestamp_s,vm_id,event,host_id,flavor_vcpus,flavor_ram_mib,initiator";
    std::size_t columns = 7;
    if (header == std::string(base) + ",parameters") columns = 8;
    else if (header != base) row_error("lifecycle", line_no, "unexpected header '" + line + "'");
    while (detail::next_line(in, line, line_no)) {
        const auto f = split_fields(line);
        if (f.size() != columns)
            row_error("lifecycle", line_no, "expected " + std::to_string(columns) + " fields, got " + std::to_string(f.size()));
        LifecycleRecord r;
        r.timestamp = field_number("lifecycle", line_no, f[0], "timestamp");
        if (f[1].empty()) row_error("lifecycle", line_no, "empty vm id");
        r.vm_id = f[1];
        const auto kind = event_from_string(f[2]);
        if (!kind) row_error("lifecycle", line_no, "unknown event '" + std::string(f[2]) + "'");
        r.event = *kind;
        r.host_id = f[3];
        if ((r.event == LifecycleEventKind::Started || r.event == LifecycleEventKind::Migrated) && r.host_id.empty())
            row_error("lifecycle", line_no, std::string(to_string(r.event)) + " event needs a host id");
        const auto vcpus = parse_int(f[4]);
        const auto ram = parse_int(f[5]);
        if (!vcpus || *vcpus < 1) row_error("lifecycle", line_no, "bad flavor_vcpus '" + std::string(f[4]) + "'");
        if (!ram || *ram < 0) row_error("lifecycle", line_no, "bad flavor_ram_mib '" + std::string(f[5]) + "'");
        r.flavor = {static_cast<int>(*vcpus), static_cast<MiB>(*ram)};
        try {
            r.initiator = initiator_from_string(f[6]);
        } catch (const InputError& e) {
            row_error("lifecycle", line_no, e.what());
        }
        if (columns == 8) r.parameters = parse_parameters(f[7], line_no);
        out.push_back(std::move(r));
    }
    return out;
}

struct VmHistory {
    const LifecycleRecord* submitted = nullptr;
    const LifecycleRecord* started = nullptr;
    const LifecycleRecord* terminal = nullptr;
    std::vector<const LifecycleRecord*> placements;  ///< started and migrated, in time order
};

std::map<std::string, VmHistory> vm_histories(const std::vector<LifecycleRecord>& records) {
    std::map<std::string, VmHistory> out;
    for (const auto& r : records) {
        auto& h = out[r.vm_id];
        switch (r.event) {
            case LifecycleEventKind::Submitted: h.submitted = &r; break;
            case LifecycleEventKind::Started:
                h.started = &r;
                h.placements.push_back(&r);
                break;
            case LifecycleEventKind::Migrated: h.placements.push_back(&r); break;
            default: h.terminal = &r; break;
        }
    }
    return out;
}

struct Sample {
    double time;
    double value;
};

std::vector<Sample> series_of(const MeasurementStore& store, EntityKind kind, std::string_view entity, std::string_view metric) {
    std::vector<Sample> out;
    for (const auto& m : store.metrics)
        if (m.kind == kind && m.entity_id == entity && m.metric == metric) out.push_back({m.timestamp, m.value});
    return out;
}

}  // namespace

void check_lifecycle(const std::vector<LifecycleRecord>& records) {
    struct Seen {
        bool submitted = false;
        bool started = false;
        bool terminal = false;
        std::string host;
    };
    std::map<std::string, Seen> seen;
    for (const auto& r : records) {
        auto& s = seen[r.vm_id];
        auto fail = [&](const std::string& what) { throw InputError("vm '" + r.vm_id + "': " + what); };
        if (s.terminal) fail(std::string(to_string(r.event)) + " after terminal event");
        switch (r.event) {
            case LifecycleEventKind::Submitted:
                if (s.submitted) fail("submitted twice");
                s.submitted = true;
                break;
            case LifecycleEventKind::Started:
                if (!s.submitted) fail("started before submitted");
                if (s.started) fail("started twice");
                s.started = true;
                break;
            case LifecycleEventKind::Migrated:
                if (!s.started) fail("migrated before started");
                break;
            case LifecycleEventKind::Completed:
                if (!s.started) fail("completed before started");
                s.terminal = true;
                break;
            case LifecycleEventKind::Terminated:
                if (!s.submitted) fail("terminated before submitted");
                s.terminal = true;
                break;
        }
    }
}

MeasurementStore ingest_measurements(std::istream& metrics, std::istream& lifecycle) {
    MeasurementStore store;
    store.metrics = read_metrics(metrics);
    store.lifecycle = read_lifecycle(lifecycle);
    std::stable_sort(store.metrics.begin(), store.metrics.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    std::stable_sort(store.lifecycle.begin(), store.lifecycle.end(),
                     [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    // Migration sources are implied by the previous placement.
    std::map<std::string, std::string> host;
    for (auto& r : store.lifecycle) {
        if (r.event == LifecycleEventKind::Migrated) r.from_host = host[r.vm_id];
        if (r.event == LifecycleEventKind::Started || r.event == LifecycleEventKind::Migrated) host[r.vm_id] = r.host_id;
    }
    check_lifecycle(store.lifecycle);
    return store;
}

MeasurementStore ingest_measurement_files(const std::filesystem::path& metrics, const std::filesystem::path& lifecycle) {
    std::ifstream m(metrics, std::ios::binary);
    if (!m) throw InputError("cannot open metrics file " + metrics.string());
    std::ifstream l(lifecycle, std::ios::binary);
    if (!l) throw InputError("cannot open lifecycle file " + lifecycle.string());
    return ingest_measurements(m, l);
}

HostCapacities host_capacities(const DataCenterModel& model) {
    HostCapacities out;
    for (const auto& s : model.servers) out[s.id] = host_capacity(s);
    return out;
}

BlackBoxTrace extract_blackbox_workload(const MeasurementStore& store, const HostCapacities& hosts,
                                        const std::string& vm_id, double resample_interval) {
    if (!(resample_interval > 0.0)) throw InputError("resample interval must be > 0");
    const auto histories = vm_histories(store.lifecycle);
    auto raw = series_of(store, EntityKind::Vm, vm_id, metric::vm_cpu_utilization);
    auto it = histories.find(vm_id);
    if (raw.empty() || it == histories.end() || !it->second.started) throw NoBehaviorModel(vm_id);
    const auto& h = it->second;

    const double start = h.started->timestamp;
    const double end = h.terminal ? h.terminal->timestamp : raw.back().time;
    std::erase_if(raw, [&](const Sample& s) { return !(s.time > start) || s.time > end; });
    if (raw.empty() || !(end > start)) throw NoBehaviorModel(vm_id);

    auto capacity_at = [&](double t) {
        const LifecycleRecord* where = h.placements.front();
        for (const auto* p : h.placements)
            if (p->timestamp < t) where = p;
        auto c = hosts.find(where->host_id);
        if (c == hosts.end()) throw InputError("vm '" + vm_id + "': unknown host '" + where->host_id + "'");
        return c->second;
    };

    // Step function: demand on (bounds[i], bounds[i+1]].
    std::vector<double> bounds{start};
    std::vector<double> demand;
    for (const auto& s : raw) {
        bounds.push_back(s.time);
        demand.push_back(s.value * capacity_at(s.time));
    }
    if (bounds.back() < end) {
        bounds.push_back(end);
        demand.push_back(demand.back());
    }
    std::vector<double> cumulative{0.0};
    for (std::size_t i = 0; i < demand.size(); ++i)
        cumulative.push_back(cumulative.back() + demand[i] * (bounds[i + 1] - bounds[i]));
    auto integral = [&](double t) {
        const auto k = static_cast<std::size_t>(std::upper_bound(bounds.begin(), bounds.end(), t) - bounds.begin());
        if (k == 0) return 0.0;
        if (k >= bounds.size()) return cumulative.back();
        return cumulative[k - 1] + demand[k - 1] * (t - bounds[k - 1]);
    };

    BlackBoxTrace trace;
    for (std::size_t k = 0;; ++k) {
        const double a = start + static_cast<double>(k) * resample_interval;
        if (!(a < end)) break;
        const double b = std::min(start + static_cast<double>(k + 1) * resample_interval, end);
        if (!(b - a > 1e-9)) break;
        trace.segments.push_back({b - a, std::max(0.0, (integral(b) - integral(a)) / (b - a))});
    }
    return trace;
}

ExtractionResult extract_scenario(const MeasurementStore& store, const HostCapacities& hosts, const ExtractOptions& options) {
    if (!(options.t0 < options.t1)) throw InputError("extraction window is empty: from must be < to");
    const std::set<std::string, std::less<>> servers(options.servers.begin(), options.servers.end());
    const auto histories = vm_histories(store.lifecycle);

    struct Keyed {
        double time;
        TimelineEvent event;
    };
    std::vector<Keyed> events;
    ExtractionResult result;
    std::size_t submissions = 0;
    for (const auto& r : store.lifecycle) {
        if (r.event != LifecycleEventKind::Submitted) continue;
        if (r.timestamp < options.t0 || r.timestamp > options.t1) continue;
        if (options.exclude_autoscaler && r.initiator == Initiator::Autoscaler) continue;
        ++submissions;
        const auto& h = histories.at(r.vm_id);
        if (h.started && !servers.empty() && !servers.contains(h.started->host_id)) continue;
        BlackBoxTrace trace;
        try {
            if (!h.started) throw NoBehaviorModel(r.vm_id);
            trace = extract_blackbox_workload(store, hosts, r.vm_id, options.resample_interval);
        } catch (const NoBehaviorModel& e) {
            result.skipped.push_back(r.vm_id);
            result.warnings.push_back(std::string("skipped ") + e.what());
            continue;
        }

        const std::string start_id = "start-" + r.vm_id;
        const std::string tpl_id = "tpl-" + r.vm_id;
        result.scenario.templates[tpl_id] = ApplicationTemplate{r.flavor, trace, r.parameters};
        events.push_back({r.timestamp - options.t0,
                          TimelineEvent{start_id, AbsoluteTime{r.timestamp - options.t0},
                                        StartApplication{tpl_id, r.vm_id, std::nullopt}, EventStatus::Pending}});
        if (h.terminal && h.terminal->timestamp <= options.t1) {
            const double offset = h.terminal->timestamp - h.started->timestamp;
            events.push_back({h.terminal->timestamp - options.t0,
                              TimelineEvent{"stop-" + r.vm_id, RelativeTo{start_id, offset}, StopApplication{r.vm_id},
                                            EventStatus::Pending}});
        }
        result.extracted.push_back(r.vm_id);
    }
    if (submissions == 0) result.warnings.push_back("no VM submissions in the extraction window");
    std::stable_sort(events.begin(), events.end(), [](const Keyed& a, const Keyed& b) { return a.time < b.time; });
    for (auto& e : events) result.scenario.events.push_back(std::move(e.event));
    return result;
}

std::vector<PowerSample> clean_power_training_data(const MeasurementStore& store, const std::string& server_id,
                                                   double bin_width) {
    if (!(bin_width > 0.0 && bin_width <= 1.0)) throw InputError("bin width must be in (0, 1]");
    const auto util = series_of(store, EntityKind::Server, server_id, metric::cpu_utilization);
    const auto power = series_of(store, EntityKind::Server, server_id, metric::power_w);
    if (util.empty() || power.empty()) return {};

    std::vector<double> gaps;
    for (std::size_t i = 1; i < util.size(); ++i)
        if (util[i].time > util[i - 1].time) gaps.push_back(util[i].time - util[i - 1].time);
    double tolerance = 1e-9;
    if (!gaps.empty()) {
        std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2), gaps.end());
        tolerance += gaps[gaps.size() / 2] / 2.0;
    }

    std::vector<PowerSample> paired;
    for (const auto& u : util) {
        auto hi = std::lower_bound(power.begin(), power.end(), u.time, [](const Sample& s, double t) { return s.time < t; });
        const Sample* best = nullptr;
        if (hi != power.end()) best = &*hi;
        if (hi != power.begin()) {
            const auto* lo = &*std::prev(hi);
            if (!best || u.time - lo->time <= best->time - u.time) best = lo;
        }
        if (!best || std::abs(best->time - u.time) > tolerance) continue;
        paired.push_back({u.value, best->value});
    }
    return bin_power_samples(paired, bin_width);
}

std::vector<PowerSample> bin_power_samples(const std::vector<PowerSample>& samples, double bin_width) {
    if (!(bin_width > 0.0 && bin_width <= 1.0)) throw InputError("bin width must be in (0, 1]");
    std::map<long long, std::pair<double, std::size_t>> bins;
    for (const auto& s : samples) {
        auto& bin = bins[std::llround(s.utilization / bin_width)];
        bin.first += s.power;
        ++bin.second;
    }
    std::vector<PowerSample> out;
    for (const auto& [k, acc] : bins)
        out.push_back({std::clamp(static_cast<double>(k) * bin_width, 0.0, 1.0), acc.first / static_cast<double>(acc.second)});
    return out;
}

namespace {

// Columns u, u^2, ..., u^d, 1 for the polynomial part.
Eigen::MatrixXd polynomial_design(const std::vector<PowerSample>& samples, int degree, int extra_columns = 0) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), degree + 1 + extra_columns);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        double p = 1.0;
        for (int k = 0; k < degree; ++k) {
            p *= samples[i].utilization;
            x(r, k) = p;
        }
        x(r, degree) = 1.0;
    }
    return x;
}

Eigen::VectorXd targets(const std::vector<PowerSample>& samples) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) y(static_cast<Eigen::Index>(i)) = samples[i].power;
    return y;
}

std::optional<Eigen::VectorXd> solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) return std::nullopt;
    return Eigen::VectorXd(qr.solve(y));
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

struct LmResult {
    Eigen::VectorXd theta;
    double sse;
    int iterations;
    bool converged;
};

// Residuals and Jacobian of poly(d) + a*(exp(b*u) - 1); theta = (c_0..c_d, a, b).
void exp_residuals(const std::vector<PowerSample>& samples, int degree, const Eigen::VectorXd& theta, Eigen::VectorXd& r,
                   Eigen::MatrixXd* jacobian) {
    const double a = theta(degree + 1);
    const double b = theta(degree + 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const double u = samples[i].utilization;
        double p = 1.0;
        double value = theta(degree);
        for (int k = 0; k < degree; ++k) {
            p *= u;
            value += theta(k) * p;
            if (jacobian) (*jacobian)(row, k) = p;
        }
        const double em1 = std::expm1(b * u);
        value += a * em1;
        r(row) = value - samples[i].power;
        if (jacobian) {
            (*jacobian)(row, degree) = 1.0;
            (*jacobian)(row, degree + 1) = em1;
            (*jacobian)(row, degree + 2) = a * u * (em1 + 1.0);
        }
    }
}

constexpr int kMaxIterations = 10000;
constexpr double kRelativeTolerance = 1e-9;

// Levenberg-Marquardt with Marquardt diagonal scaling.
LmResult levenberg_marquardt(const std::vector<PowerSample>& samples, int degree, Eigen::VectorXd theta) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto p = theta.size();
    Eigen::VectorXd r(n), trial_r(n);
    Eigen::MatrixXd j(n, p);
    exp_residuals(samples, degree, theta, r, &j);
    double sse = r.squaredNorm();
    double lambda = 1e-3;
    for (int it = 1; it <= kMaxIterations; ++it) {
        if (sse == 0.0) return {theta, sse, it - 1, true};
        Eigen::VectorXd scale = j.colwise().norm();
        for (Eigen::Index k = 0; k < p; ++k) scale(k) = std::max(scale(k), 1e-12);
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd m(n + p, p);
            m.topRows(n) = j;
            m.bottomRows(p) = (std::sqrt(lambda) * scale).asDiagonal();
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
            rhs.head(n) = -r;
            const Eigen::VectorXd step = m.colPivHouseholderQr().solve(rhs);
            const Eigen::VectorXd trial = theta + step;
            exp_residuals(samples, degree, trial, trial_r, nullptr);
            const double trial_sse = trial_r.squaredNorm();
            if (std::isfinite(trial_sse) && trial_sse < sse) {
                const double improvement = (sse - trial_sse) / sse;
                theta = trial;
                sse = trial_sse;
                lambda = std::max(lambda / 10.0, 1e-15);
                exp_residuals(samples, degree, theta, r, &j);
                if (improvement < kRelativeTolerance) return {theta, sse, it, true};
                accepted = true;
            } else {
                lambda *= 10.0;
                // No descent direction left at machine precision: stationary.
                if (lambda > 1e16) return {theta, sse, it, true};
            }
        }
    }
    return {theta, sse, kMaxIterations, false};
}

}  // namespace

double residual_sum_of_squares(const PowerModel& model, const std::vector<PowerSample>& samples) {
    double sse = 0.0;
    for (const auto& s : samples) {
        const double d = eval_power(model, s.utilization) - s.power;
        sse += d * d;
    }
    return sse;
}

FitResult fit_power_model(const std::vector<PowerSample>& samples, const PowerFamily& family) {
    const auto count = family.coefficient_count();
    if (samples.size() < count)
        throw InputError("underdetermined fit: " + std::to_string(samples.size()) + " samples for " + std::to_string(count) +
                         " coefficients");
    for (const auto& s : samples)
        if (!(s.utilization >= 0.0 && s.utilization <= 1.0) || !std::isfinite(s.power))
            throw InputError("training samples need utilization in [0,1] and finite power");

    const Eigen::VectorXd y = targets(samples);
    const auto poly = solve_least_squares(polynomial_design(samples, family.degree), y);
    if (!poly) throw InputError("underdetermined fit: too few distinct utilization values");

    FitResult result;
    result.samples = samples.size();
    result.model.family = family;
    if (family.kind == PowerFamilyKind::Polynomial) {
        result.model.coefficients = to_vector(*poly);
    } else {
        const int d = family.degree;
        std::vector<Eigen::VectorXd> starts;
        Eigen::VectorXd base(d + 3);
        base.head(d + 1) = *poly;
        base(d + 1) = 0.0;
        base(d + 2) = 1.0;
        starts.push_back(base);
        // Extra starts: for a fixed rate the model is linear in the rest.
        for (double b : {-5.0, -2.0, -1.0, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0}) {
            auto x = polynomial_design(samples, d, 1);
            for (std::size_t i = 0; i < samples.size(); ++i)
                x(static_cast<Eigen::Index>(i), d + 1) = std::expm1(b * samples[i].utilization);
            if (auto lin = solve_least_squares(x, y)) {
                Eigen::VectorXd s(d + 3);
                s.head(d + 2) = *lin;
                s(d + 2) = b;
                starts.push_back(s);
            }
        }
        std::optional<LmResult> best;
        for (const auto& s : starts) {
            auto lm = levenberg_marquardt(samples, d, s);
            if (!best || lm.sse < best->sse) best = lm;
        }
        result.model.coefficients = to_vector(best->theta);
        result.iterations = best->iterations;
        result.converged = best->converged;
    }
    result.residual_rms = std::sqrt(residual_sum_of_squares(result.model, samples) / static_cast<double>(samples.size()));
    return result;
}

std::string serialize_power_model(const PowerModel& model) {
    return detail::power_model_to_json(model).dump(2) + "\n";
}

std::string serialize_fit(const FitResult& fit) {
    auto j = detail::power_model_to_json(fit.model);
    j["diagnostics"] = {{"residual_rms", fit.residual_rms},
                        {"samples", fit.samples},
                        {"iterations", fit.iterations},
                        {"converged", fit.converged}};
    return j.dump(2) + "\n";
}

PowerModel parse_power_model(std::string_view json_text) {
    return detail::power_model_from_json(detail::parse_json(json_text, "power model"), "power model");
}

}  // namespace dcsim

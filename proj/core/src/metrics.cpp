#include "etlsched/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "etlsched/cluster.hpp"
#include "etlsched/errors.hpp"

namespace etlsched {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

MetricsReport compute_metrics(const std::vector<EpisodeTrace>& traces, double gamma) {
    if (traces.empty()) throw ConfigError("compute_metrics needs at least one trace");

    MetricsReport rep;
    rep.episodes = static_cast<int>(traces.size());

    double asd_sum = 0.0;
    int asd_episodes = 0;
    double tcr_sum = 0.0, tp_sum = 0.0, rc_sum = 0.0, ret_sum = 0.0, makespan_sum = 0.0;
    int rc_episodes = 0;

    for (const EpisodeTrace& tr : traces) {
        double wait_sum = 0.0;
        int started = 0, delta_sum = 0, completed = 0;
        double cost_sum = 0.0;
        for (const TaskRecord& t : tr.tasks) {
            if (t.start >= 0.0) {
                wait_sum += t.start - t.release;
                ++started;
            }
            if (t.success) ++delta_sum;
            if (t.finish >= 0.0) {
                ++completed;
                cost_sum += std::min(t.cost / tr.c_max, 1.0);
            }
        }
        if (started > 0) {
            asd_sum += wait_sum / started;
            ++asd_episodes;
        }
        tcr_sum += 100.0 * delta_sum / tr.n_tasks;
        tp_sum += tr.makespan > 0.0 ? 100.0 * completed / tr.makespan : 0.0;
        if (completed > 0) {
            rc_sum += cost_sum / completed;
            ++rc_episodes;
        }
        double ret = 0.0, g = 1.0;
        for (double r : tr.rewards) {
            ret += g * r;
            g *= gamma;
        }
        ret_sum += ret;
        makespan_sum += tr.makespan;
        rep.completed_total += completed;
    }

    rep.asd = asd_episodes > 0 ? asd_sum / asd_episodes : 0.0;
    rep.tcr = tcr_sum / rep.episodes;
    rep.tp = tp_sum / rep.episodes;
    rep.rc = rc_episodes > 0 ? rc_sum / rc_episodes : 0.0;
    rep.avg_cum_reward = ret_sum / rep.episodes;
    rep.mean_makespan = makespan_sum / rep.episodes;
    return rep;
}

namespace {

// competition ranking: rank 1 = best, equal values share a rank
void assign_ranks(std::vector<ComparisonRow>& rows, double MetricsReport::* field, bool ascending,
                  int ComparisonRow::* rank_field) {
    std::vector<size_t> order(rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const double va = rows[a].report.*field;
        const double vb = rows[b].report.*field;
        if (va != vb) return ascending ? va < vb : va > vb;
        return rows[a].name < rows[b].name;
    });
    for (size_t pos = 0; pos < order.size(); ++pos) {
        const size_t i = order[pos];
        if (pos > 0 && rows[i].report.*field == rows[order[pos - 1]].report.*field)
            rows[i].*rank_field = rows[order[pos - 1]].*rank_field;
        else
            rows[i].*rank_field = static_cast<int>(pos) + 1;
    }
}

} // namespace

ComparisonTable compare_reports(const std::map<std::string, MetricsReport>& reports) {
    if (reports.size() < 2) throw ConfigError("compare_reports needs at least two reports");

    ComparisonTable table;
    for (const auto& [name, rep] : reports) table.rows.push_back({name, rep, 0, 0, 0, 0});

    const std::uint64_t fp = table.rows.front().report.config_fingerprint;
    for (const ComparisonRow& row : table.rows) {
        if (row.report.config_fingerprint != fp) {
            table.warnings.push_back("reports were produced under differing configurations");
            break;
        }
    }

    assign_ranks(table.rows, &MetricsReport::asd, true, &ComparisonRow::rank_asd);
    assign_ranks(table.rows, &MetricsReport::tcr, false, &ComparisonRow::rank_tcr);
    assign_ranks(table.rows, &MetricsReport::tp, false, &ComparisonRow::rank_tp);
    assign_ranks(table.rows, &MetricsReport::rc, true, &ComparisonRow::rank_rc);

    std::sort(table.rows.begin(), table.rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        if (a.rank_asd != b.rank_asd) return a.rank_asd < b.rank_asd;
        return a.name < b.name;
    });
    return table;
}

std::string ComparisonTable::to_text() const {
    std::ostringstream os;
    os << "Method            ASD ↓    TCR ↑    TP ↑     RC ↓\n";
    for (const ComparisonRow& r : rows) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-16s %8.3f %8.2f %8.2f %8.4f\n", r.name.c_str(),
                      r.report.asd, r.report.tcr, r.report.tp, r.report.rc);
        os << line;
    }
    for (const std::string& w : warnings) os << "warning: " << w << "\n";
    return os.str();
}

std::string ComparisonTable::to_csv() const {
    std::ostringstream os;
    os << "method,asd,tcr,tp,rc,avg_cum_reward,rank_asd,rank_tcr,rank_tp,rank_rc\n";
    for (const ComparisonRow& r : rows) {
        os << r.name << ',' << fmt_double(r.report.asd) << ',' << fmt_double(r.report.tcr) << ','
           << fmt_double(r.report.tp) << ',' << fmt_double(r.report.rc) << ','
           << fmt_double(r.report.avg_cum_reward) << ',' << r.rank_asd << ',' << r.rank_tcr << ','
           << r.rank_tp << ',' << r.rank_rc << '\n';
    }
    return os.str();
}

nlohmann::ordered_json ComparisonTable::to_json() const {
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::ordered_json::array();
    for (const ComparisonRow& r : rows) {
        nlohmann::ordered_json row;
        row["method"] = r.name;
        row["report"] = metrics_report_to_json(r.report);
        row["rank_asd"] = r.rank_asd;
        row["rank_tcr"] = r.rank_tcr;
        row["rank_tp"] = r.rank_tp;
        row["rank_rc"] = r.rank_rc;
        j["rows"].push_back(std::move(row));
    }
    j["warnings"] = warnings;
    return j;
}

nlohmann::ordered_json metrics_report_to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["asd"] = r.asd;
    j["tcr"] = r.tcr;
    j["tp"] = r.tp;
    j["rc"] = r.rc;
    j["avg_cum_reward"] = r.avg_cum_reward;
    j["episodes"] = r.episodes;
    j["seeds"] = r.seeds;
    j["mean_makespan"] = r.mean_makespan;
    j["completed_total"] = r.completed_total;
    j["config_fingerprint"] = r.config_fingerprint;
    return j;
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.asd = j.at("asd").get<double>();
    r.tcr = j.at("tcr").get<double>();
    r.tp = j.at("tp").get<double>();
    r.rc = j.at("rc").get<double>();
    r.avg_cum_reward = j.value("avg_cum_reward", 0.0);
    r.episodes = j.value("episodes", 0);
    if (j.contains("seeds")) r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.mean_makespan = j.value("mean_makespan", 0.0);
    r.completed_total = j.value("completed_total", 0L);
    r.config_fingerprint = j.value("config_fingerprint", 0ULL);
    return r;
}

} // namespace etlsched

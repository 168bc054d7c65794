#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "driftstream/experiment.hpp"
#include "driftstream/generators.hpp"

namespace {

using namespace driftstream;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(ch))) {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    std::erase_if(parts, [](const std::string& p) { return p.empty(); });
    return parts;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
    std::vector<double> values;
    for (const auto& part : split_list(text)) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw CLI::ValidationError(what, "'" + part + "' is not a number");
        }
    }
    return values;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> values;
    for (const auto& part : split_list(text)) {
        try {
            std::size_t used = 0;
            values.push_back(std::stoull(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--seeds", "'" + part + "' is not a seed");
        }
    }
    return values;
}

bool parse_bool(const std::string& text) {
    if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
    if (text == "0" || text == "false" || text == "no" || text == "off") return false;
    throw std::runtime_error("'" + text + "' is not a boolean");
}

// Raw option values shared by the run and sweep subcommands; the experiment
// config is assembled as defaults < config file < flags.
struct CommonOptions {
    std::string config_path;
    std::string stream_path;
    std::string generator_record;
    bool header = false;
    int label_column = -1;
    std::string estimators;
    std::string bin_widths;
    std::string lambda;
    std::string variant;
    std::string epsilon;
    std::string seeds;
    std::string window;
    std::string out_dir;
    std::string format = "plain";
    std::string jobs;
    bool no_meter = false;
};

void add_common_flags(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "config file (key=value lines, # comments)");
    cmd->add_option("--stream", opts.stream_path, "CSV stream path (features..., label)");
    cmd->add_option("--generator", opts.generator_record,
                    "generator record, e.g. kind=interchanging_rbf;samples=20000;seed=1");
    cmd->add_flag("--header", opts.header, "first CSV row is a header");
    cmd->add_option("--label-column", opts.label_column, "0-based label column, -1 = last");
    cmd->add_option("--L", opts.estimators, "ensemble size");
    cmd->add_option("--bin-width", opts.bin_widths, "bin widths, comma separated (default 0.1,0.01)");
    cmd->add_option("--lambda", opts.lambda, "decay rate");
    cmd->add_option("--variant", opts.variant, "full | lambda0 | no_weights");
    cmd->add_option("--epsilon", opts.epsilon, "distance epsilon");
    cmd->add_option("--seeds", opts.seeds, "run seeds, comma separated (default 1,2,3)");
    cmd->add_option("--window", opts.window, "windowed-error trace size (0 = off)");
    cmd->add_option("--out", opts.out_dir, "output directory for artifacts");
    cmd->add_option("--format", opts.format, "table format: csv | markdown | plain");
    cmd->add_option("--jobs", opts.jobs, "parallel runs (default 1)");
    cmd->add_flag("--no-meter", opts.no_meter, "skip resource metering");
}

ExperimentConfig build_config(const CLI::App* cmd, const CommonOptions& opts) {
    ExperimentConfig config;

    std::map<std::string, std::string> file;
    if (!opts.config_path.empty()) file = parse_config_file(opts.config_path);
    auto file_value = [&](const char* key) -> std::optional<std::string> {
        auto it = file.find(key);
        if (it == file.end()) return std::nullopt;
        return it->second;
    };

    // config file layer
    if (auto v = file_value("stream")) config.source.csv_path = *v;
    if (auto v = file_value("generator")) config.source.generator_record = *v;
    if (auto v = file_value("header")) config.source.csv_has_header = parse_bool(*v);
    if (auto v = file_value("label_column")) config.source.label_column = std::stoi(*v);
    if (auto v = file_value("L")) config.learner.num_estimators = std::stoul(*v);
    if (auto v = file_value("bin_width")) config.bin_widths = parse_double_list(*v, "bin_width");
    if (auto v = file_value("lambda")) config.learner.decay_rate = std::stod(*v);
    if (auto v = file_value("variant")) config.learner.variant = parse_variant(*v);
    if (auto v = file_value("epsilon")) config.learner.distance_epsilon = std::stod(*v);
    if (auto v = file_value("seeds")) config.seeds = parse_seed_list(*v);
    if (auto v = file_value("window")) config.window = std::stoull(*v);
    if (auto v = file_value("out")) config.output_dir = *v;
    if (auto v = file_value("jobs")) config.jobs = static_cast<unsigned>(std::stoul(*v));
    if (auto v = file_value("meter")) config.meter_enabled = parse_bool(*v);
    for (const auto& [key, value] : file) {
        static const std::vector<std::string> known = {
            "stream", "generator", "header", "label_column", "L",   "bin_width", "lambda",
            "variant", "epsilon",  "seeds",  "window",       "out", "format",    "jobs",
            "meter"};
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::runtime_error("unknown config key '" + key + "' in " + opts.config_path);
        }
        (void)value;
    }

    // flag layer
    if (cmd->count("--stream") > 0) config.source.csv_path = opts.stream_path;
    if (cmd->count("--generator") > 0) config.source.generator_record = opts.generator_record;
    if (cmd->count("--header") > 0) config.source.csv_has_header = opts.header;
    if (cmd->count("--label-column") > 0) config.source.label_column = opts.label_column;
    if (cmd->count("--L") > 0) config.learner.num_estimators = std::stoul(opts.estimators);
    if (cmd->count("--bin-width") > 0) config.bin_widths = parse_double_list(opts.bin_widths, "--bin-width");
    if (cmd->count("--lambda") > 0) config.learner.decay_rate = std::stod(opts.lambda);
    if (cmd->count("--variant") > 0) config.learner.variant = parse_variant(opts.variant);
    if (cmd->count("--epsilon") > 0) config.learner.distance_epsilon = std::stod(opts.epsilon);
    if (cmd->count("--seeds") > 0) config.seeds = parse_seed_list(opts.seeds);
    if (cmd->count("--window") > 0) config.window = std::stoull(opts.window);
    if (cmd->count("--out") > 0) config.output_dir = opts.out_dir;
    if (cmd->count("--jobs") > 0) config.jobs = static_cast<unsigned>(std::stoul(opts.jobs));
    if (opts.no_meter) config.meter_enabled = false;

    // environment layer applies only when nothing else chose the seeds
    if (cmd->count("--seeds") == 0 && !file_value("seeds")) {
        if (const char* env = std::getenv("DRIFTSTREAM_SEED")) {
            config.seeds = parse_seed_list(env);
        }
    }
    return config;
}

std::string table_format_name(const CLI::App* cmd, const CommonOptions& opts) {
    if (cmd->count("--format") > 0) return opts.format;
    if (!opts.config_path.empty()) {
        auto file = parse_config_file(opts.config_path);
        auto it = file.find("format");
        if (it != file.end()) return it->second;
    }
    return opts.format;
}

int cmd_run(const CLI::App* cmd, const CommonOptions& opts) {
    const ExperimentConfig config = build_config(cmd, opts);
    const TableFormat format = parse_table_format(table_format_name(cmd, opts));
    const ExperimentResult result = run_experiment(config);
    std::cout << emit_report(result, format);
    if (!config.output_dir.empty()) {
        std::cout << "artifacts written to " << config.output_dir << "\n";
    }
    return 0;
}

int cmd_sweep(const CLI::App* cmd, const CommonOptions& opts, const std::string& parameter,
              const std::string& values_text) {
    const ExperimentConfig config = build_config(cmd, opts);
    const std::vector<double> values = parse_double_list(values_text, "--values");
    const auto points = sweep(config, parameter, values);
    std::cout << sweep_csv(points);
    if (!config.output_dir.empty()) {
        std::cout << "sweep table written to " << config.output_dir << "/sweep.csv\n";
    }
    return 0;
}

int cmd_generate(const std::string& record, const std::string& out_path, bool with_header) {
    if (out_path.empty()) throw std::runtime_error("generate needs --out <file.csv>");
    const Stream stream = generate(parse_generator_spec(record));
    write_csv_stream(out_path, stream, with_header);
    std::cout << "wrote " << stream.instances.size() << " instances to " << out_path << "\n";
    return 0;
}

int cmd_stats(const std::string& path, bool header, int label_column) {
    const Stream stream = load_csv_stream(path, label_column, header);
    std::cout << format_stream_stats(stream_stats(stream.instances));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming drift benchmark: projection-hash ensemble, generators, prequential metrics"};
    app.require_subcommand(1);

    CommonOptions run_opts;
    CLI::App* run_cmd = app.add_subcommand("run", "prequential evaluation over seeds and bin widths");
    add_common_flags(run_cmd, run_opts);

    CommonOptions sweep_opts;
    std::string sweep_parameter;
    std::string sweep_values;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "one experiment per parameter value");
    add_common_flags(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--param", sweep_parameter, "L | bin_width | lambda")->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();

    std::string gen_record;
    std::string gen_out;
    bool gen_header = false;
    CLI::App* gen_cmd = app.add_subcommand("generate", "materialize a synthetic stream as CSV");
    gen_cmd->add_option("--generator", gen_record, "generator record")->required();
    gen_cmd->add_option("--out", gen_out, "output CSV path")->required();
    gen_cmd->add_flag("--header", gen_header, "write a header row");

    std::string stats_path;
    bool stats_header = false;
    int stats_label_column = -1;
    CLI::App* stats_cmd = app.add_subcommand("stats", "shape and class balance of a CSV stream");
    stats_cmd->add_option("--stream", stats_path, "CSV stream path")->required();
    stats_cmd->add_flag("--header", stats_header, "first CSV row is a header");
    stats_cmd->add_option("--label-column", stats_label_column, "0-based label column, -1 = last");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(run_cmd, run_opts);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_cmd, sweep_opts, sweep_parameter, sweep_values);
        if (gen_cmd->parsed()) return cmd_generate(gen_record, gen_out, gen_header);
        if (stats_cmd->parsed()) return cmd_stats(stats_path, stats_header, stats_label_column);
    } catch (const std::exception& err) {
        std::cerr << "driftstream: " << err.what() << "\n";
        return 1;
    }
    return 0;
}

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pem/inference.hpp"
#include "pem/model_io.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct PathOptions {
    std::string corpus;
    std::string lexicon;
    std::string out;
    std::string log;
};

// TrainConfig keys plus file-path keys, all overridable from the command line.
struct ConfigSource {
    std::string config_path;
    std::map<std::string, std::string> flag_values;  // only flags the user passed

    pem::TrainConfig resolve(PathOptions& paths) const {
        pem::TrainConfig config;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw pem::DataError("cannot open config file: " + config_path);
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.empty() || line[0] == '#') continue;
                const std::size_t eq = line.find('=');
                if (eq == std::string::npos)
                    throw pem::DataError("config line " + std::to_string(lineno) +
                                         ": expected key=value");
                apply(config, paths, line.substr(0, eq), line.substr(eq + 1));
            }
        }
        for (const auto& [key, value] : flag_values) apply(config, paths, key, value);
        return config;
    }

private:
    static void apply(pem::TrainConfig& config, PathOptions& paths, const std::string& key,
                      const std::string& value) {
        if (key == "corpus") paths.corpus = value;
        else if (key == "lexicon") paths.lexicon = value;
        else if (key == "out") paths.out = value;
        else if (key == "log") paths.log = value;
        else pem::config_set(config, key, value);
    }
};

void add_config_flags(CLI::App* cmd, ConfigSource& source) {
    cmd->add_option("--config", source.config_path, "flat key=value config file");
    static const std::vector<std::string> keys = {
        "model",     "d",          "d_mlp",      "window",     "negatives",
        "min_count", "subsample_t", "gamma",     "lambda",     "batch",
        "iter",      "lr_embed",   "lr_attention", "lr_discriminator", "eval_every",
        "max_epochs", "threads",   "seed"};
    for (const std::string& key : keys) {
        auto setter = [&source, key](const std::string& value) { source.flag_values[key] = value; };
        cmd->add_option_function<std::string>("--" + key, setter, "override config key " + key);
    }
}

pem::Lexicon load_lexicon(const std::string& path) {
    if (path.empty()) return pem::Lexicon();
    return pem::Lexicon::load(path);
}

void echo_config(std::ostream& out, const pem::TrainConfig& config) {
    std::istringstream echo(pem::config_echo(config));
    std::string line;
    while (std::getline(echo, line)) out << "# " << line << '\n';
}

json config_json(const pem::TrainConfig& config) {
    json obj = json::object();
    for (const auto& [key, value] : pem::config_to_kv(config)) obj[key] = value;
    return obj;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw pem::DataError("cannot open output file: " + path);
    return out;
}

const char* label_letter(pem::Label label) {
    switch (label) {
        case pem::Label::Liberal: return "D";
        case pem::Label::Conservative: return "R";
        case pem::Label::Unlabeled: return "-";
    }
    return "-";
}

struct AccountGroup {
    std::vector<pem::TokenSeq> tweets;
    std::size_t liberal = 0, conservative = 0;
};

std::map<std::string, AccountGroup> group_by_account(const std::vector<pem::LabeledTweet>& corpus) {
    std::map<std::string, AccountGroup> accounts;
    for (const pem::LabeledTweet& tweet : corpus) {
        AccountGroup& group = accounts[tweet.account_id];
        group.tweets.push_back(tweet.seq);
        if (tweet.label == pem::Label::Liberal) ++group.liberal;
        else if (tweet.label == pem::Label::Conservative) ++group.conservative;
    }
    return accounts;
}

pem::Label account_label(const AccountGroup& group) {
    return group.conservative > group.liberal ? pem::Label::Conservative : pem::Label::Liberal;
}

struct EvalResult {
    pem::Metrics tweet_level;
    pem::Metrics account_level;
};

EvalResult evaluate(const pem::TrainedModel& model, const std::vector<pem::LabeledTweet>& corpus,
                    pem::ScoreMode mode, pem::TokenScope scope) {
    std::vector<pem::Label> tweet_preds, tweet_labels;
    for (const pem::LabeledTweet& tweet : corpus) {
        if (tweet.label == pem::Label::Unlabeled)
            throw pem::DataError("evaluation requires labeled tweets");
        tweet_preds.push_back(pem::classify(pem::score_tweet(model, tweet.seq, mode, scope).value));
        tweet_labels.push_back(tweet.label);
    }

    std::vector<pem::Label> account_preds, account_labels;
    for (const auto& [account, group] : group_by_account(corpus)) {
        account_preds.push_back(
            pem::classify(pem::score_account(model, group.tweets, mode, scope).value));
        account_labels.push_back(account_label(group));
    }

    return {pem::metrics(tweet_preds, tweet_labels), pem::metrics(account_preds, account_labels)};
}

struct MeanStd {
    double mean = 0, std = 0;
};

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd ms;
    for (const double v : values) ms.mean += v;
    ms.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double var = 0;
        for (const double v : values) var += (v - ms.mean) * (v - ms.mean);
        ms.std = std::sqrt(var / static_cast<double>(values.size() - 1));
    }
    return ms;
}

int cmd_train(const ConfigSource& source, PathOptions paths) {
    const pem::TrainConfig config = source.resolve(paths);
    if (paths.corpus.empty()) throw pem::DataError("train: missing corpus path");
    if (paths.out.empty()) throw pem::DataError("train: missing output model path");
    if (paths.log.empty()) paths.log = paths.out + ".log.tsv";

    const pem::Lexicon lexicon = load_lexicon(paths.lexicon);
    const auto corpus = pem::load_corpus_jsonl(paths.corpus, lexicon);
    const pem::DatasetSplit split = pem::split_dataset(corpus, config.seed);

    const pem::TrainedModel model = pem::train(config, split.train, split.validation);
    pem::save_model(model, paths.out);
    auto log_out = open_out(paths.log);
    pem::write_training_log(model, log_out);

    std::cout << "trained " << pem::model_kind_name(config.model_kind) << " model: vocab "
              << model.vocab.size() << ", " << model.log.size() << " checks, model " << paths.out
              << ", log " << paths.log << "\n";
    return kExitOk;
}

int cmd_score(const std::string& model_path, const std::string& corpus_path,
              const std::string& lexicon_path, const std::string& out_path,
              const std::string& mode_name, const std::string& scope_name,
              const std::string& level) {
    const pem::TrainedModel model = pem::load_model(model_path);
    const pem::Lexicon lexicon = load_lexicon(lexicon_path);
    const auto corpus = pem::load_corpus_jsonl(corpus_path, lexicon);
    const pem::ScoreMode mode = pem::score_mode_from(mode_name);
    const pem::TokenScope scope = pem::token_scope_from(scope_name);

    auto out = open_out(out_path);
    echo_config(out, model.config);
    out << "account_id\ttimestamp\tscore\tlabel\n";
    if (level == "tweet") {
        for (const pem::LabeledTweet& tweet : corpus) {
            const double score = pem::score_tweet(model, tweet.seq, mode, scope).value;
            out << tweet.account_id << '\t'
                << (tweet.timestamp ? std::to_string(*tweet.timestamp) : std::string()) << '\t'
                << pem::format_double(score) << '\t' << label_letter(tweet.label) << '\n';
        }
    } else if (level == "account") {
        for (const auto& [account, group] : group_by_account(corpus)) {
            const double score = pem::score_account(model, group.tweets, mode, scope).value;
            const pem::Label label = group.liberal + group.conservative > 0
                                         ? account_label(group)
                                         : pem::Label::Unlabeled;
            out << account << "\t\t" << pem::format_double(score) << '\t' << label_letter(label)
                << '\n';
        }
    } else {
        throw pem::DataError("unknown level '" + level + "' (expected tweet|account)");
    }
    return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& corpus_path,
             const std::string& lexicon_path, const std::string& out_path,
             const std::string& mode_name, const std::string& scope_name, std::size_t folds,
             std::uint64_t fold_seed) {
    const pem::TrainedModel model = pem::load_model(model_path);
    const pem::Lexicon lexicon = load_lexicon(lexicon_path);
    const auto corpus = pem::load_corpus_jsonl(corpus_path, lexicon);
    const pem::ScoreMode mode = pem::score_mode_from(mode_name);
    const pem::TokenScope scope = pem::token_scope_from(scope_name);

    json report;
    report["config"] = config_json(model.config);

    if (folds == 0) {
        const EvalResult result = evaluate(model, corpus, mode, scope);
        std::cout << "tweet-level    accuracy " << result.tweet_level.accuracy << "  F1 "
                  << result.tweet_level.f1 << "\n"
                  << "account-level  accuracy " << result.account_level.accuracy << "  F1 "
                  << result.account_level.f1 << "\n";
        report["tweet_level"] = {{"accuracy", result.tweet_level.accuracy},
                                 {"f1", result.tweet_level.f1}};
        report["account_level"] = {{"accuracy", result.account_level.accuracy},
                                   {"f1", result.account_level.f1}};
    } else {
        // Cross validation retrains with the model's own config on each fold.
        const auto fold_splits = pem::kfold_split(corpus, folds, fold_seed);
        std::vector<double> t_acc, t_f1, a_acc, a_f1;
        for (const pem::DatasetSplit& fold : fold_splits) {
            const pem::TrainedModel fold_model =
                pem::train(model.config, fold.train, fold.validation);
            const EvalResult result = evaluate(fold_model, fold.test, mode, scope);
            t_acc.push_back(result.tweet_level.accuracy);
            t_f1.push_back(result.tweet_level.f1);
            a_acc.push_back(result.account_level.accuracy);
            a_f1.push_back(result.account_level.f1);
        }
        const MeanStd ta = mean_std(t_acc), tf = mean_std(t_f1);
        const MeanStd aa = mean_std(a_acc), af = mean_std(a_f1);
        std::cout << "tweet-level    " << ta.mean << " ± " << ta.std << " ; " << tf.mean
                  << " ± " << tf.std << "\n"
                  << "account-level  " << aa.mean << " ± " << aa.std << " ; " << af.mean
                  << " ± " << af.std << "\n";
        report["folds"] = folds;
        report["tweet_level"] = {{"accuracy_mean", ta.mean},
                                 {"accuracy_std", ta.std},
                                 {"f1_mean", tf.mean},
                                 {"f1_std", tf.std}};
        report["account_level"] = {{"accuracy_mean", aa.mean},
                                   {"accuracy_std", aa.std},
                                   {"f1_mean", af.mean},
                                   {"f1_std", af.std}};
    }

    if (!out_path.empty()) {
        auto out = open_out(out_path);
        out << report.dump(2) << '\n';
    }
    return kExitOk;
}

int cmd_export(const std::string& model_path, const std::string& out_path,
               const std::string& format) {
    if (format != "text") throw pem::DataError("unknown export format '" + format + "'");
    const pem::TrainedModel model = pem::load_model(model_path);
    auto out = open_out(out_path);
    pem::export_text(model, out);
    if (!out) throw pem::DataError("failed writing export file: " + out_path);
    return kExitOk;
}

std::map<std::string, std::string> load_group_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pem::DataError("cannot open group map file: " + path);
    std::map<std::string, std::string> groups;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw pem::DataError("group map line " + std::to_string(lineno) +
                                 ": expected account<TAB>group");
        groups[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return groups;
}

std::vector<std::string> load_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pem::DataError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

void write_period_rows(std::ostream& out, const char* level,
                       const std::vector<pem::PeriodRow>& rows) {
    for (const pem::PeriodRow& row : rows)
        out << level << '\t' << row.period << '\t' << row.liberal << '\t' << row.conservative
            << '\t' << pem::format_double(row.mean_score) << '\n';
}

int cmd_report(const std::string& model_path, const std::string& corpus_path,
               const std::string& lexicon_path, const std::string& out_path,
               const std::string& report_kind, const std::string& mode_name,
               const std::string& scope_name, int period_days, const std::string& groups_path,
               const std::string& keywords_path, std::size_t grid_points) {
    const pem::TrainedModel model = pem::load_model(model_path);
    const pem::Lexicon lexicon = load_lexicon(lexicon_path);
    const auto corpus = pem::load_corpus_jsonl(corpus_path, lexicon);
    const pem::ScoreMode mode = pem::score_mode_from(mode_name);
    const pem::TokenScope scope = pem::token_scope_from(scope_name);

    std::vector<pem::ScoredTweet> scored;
    scored.reserve(corpus.size());
    for (const pem::LabeledTweet& tweet : corpus)
        scored.push_back({tweet.account_id, tweet.timestamp,
                          pem::score_tweet(model, tweet.seq, mode, scope).value, tweet.label});

    auto out = open_out(out_path);
    echo_config(out, model.config);

    if (report_kind == "periods") {
        std::optional<std::int64_t> origin;
        for (const pem::ScoredTweet& tweet : scored)
            if (tweet.timestamp && (!origin || *tweet.timestamp < *origin))
                origin = tweet.timestamp;
        if (!origin) throw pem::DataError("periods report: corpus has no 'timestamp' field values");
        const pem::PeriodReport report = pem::aggregate_periods(scored, period_days, *origin);
        out << "level\tperiod\tliberal\tconservative\tmean_score\n";
        write_period_rows(out, "tweet", report.tweet_level);
        write_period_rows(out, "account", report.account_level);
        out << "# skipped_missing_timestamp=" << report.skipped_missing_timestamp << '\n';
    } else if (report_kind == "groups") {
        if (groups_path.empty()) throw pem::DataError("groups report: missing --groups file");
        const auto group_of_account = load_group_map(groups_path);
        std::map<std::string, std::pair<double, std::size_t>> account_sums;
        for (const pem::ScoredTweet& tweet : scored) {
            auto& [sum, count] = account_sums[tweet.account_id];
            sum += tweet.score;
            ++count;
        }
        std::map<std::string, double> account_scores;
        for (const auto& [account, sc] : account_sums)
            account_scores[account] = sc.first / static_cast<double>(sc.second);
        const auto groups = pem::aggregate_groups(account_scores, group_of_account);
        out << "group\tq\tq_hat\tq_hat_bounded\n";
        for (const auto& [group, gs] : groups)
            out << group << '\t' << pem::format_double(gs.raw) << '\t'
                << pem::format_double(gs.normalized) << '\t'
                << pem::format_double(gs.normalized_bounded) << '\n';
    } else if (report_kind == "kde") {
        std::vector<double> scores;
        scores.reserve(scored.size());
        for (const pem::ScoredTweet& tweet : scored) scores.push_back(tweet.score);
        const pem::Vector grid = pem::kde_default_grid(scores, grid_points);
        const pem::Vector density = pem::kde_density(scores, grid);
        out << "score\tdensity\n";
        for (Eigen::Index i = 0; i < grid.size(); ++i)
            out << pem::format_double(grid(i)) << '\t' << pem::format_double(density(i)) << '\n';
    } else if (report_kind == "bias") {
        std::vector<std::string> keywords;
        if (!keywords_path.empty()) keywords = load_lines(keywords_path);
        const pem::BiasSummary summary =
            pem::corpus_bias_summary(model, corpus, keywords, mode, scope);
        json obj;
        obj["config"] = config_json(model.config);
        obj["overall_mean"] = summary.overall_mean;
        obj["tweet_count"] = summary.tweet_count;
        obj["weekly"] = json::array();
        for (const pem::PeriodRow& row : summary.weekly)
            obj["weekly"].push_back({{"week", row.period},
                                     {"liberal", row.liberal},
                                     {"conservative", row.conservative},
                                     {"mean_score", row.mean_score}});
        obj["weekly_skipped"] = summary.weekly_skipped;
        obj["liberal_keywords"] = summary.liberal_keywords;
        obj["conservative_keywords"] = summary.conservative_keywords;
        obj["keywords"] = json::array();
        for (const pem::KeywordBias& kw : summary.keywords)
            obj["keywords"].push_back(
                {{"keyword", kw.keyword}, {"score", kw.score}, {"leaning", pem::leaning_name(kw.score)}});
        obj["oov_keywords"] = summary.oov_keywords;
        out << obj.dump(2) << '\n';
    } else {
        throw pem::DataError("unknown report '" + report_kind +
                             "' (expected periods|groups|kde|bias)");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"polarity-aware token embeddings: train, score, evaluate, export, report"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model from a JSONL corpus");
    ConfigSource train_source;
    PathOptions train_paths;
    add_config_flags(train_cmd, train_source);
    train_cmd->add_option("--corpus", train_paths.corpus, "JSONL corpus path");
    train_cmd->add_option("--lexicon", train_paths.lexicon, "entity lexicon path");
    train_cmd->add_option("--out", train_paths.out, "output model path");
    train_cmd->add_option("--train-log", train_paths.log, "training log TSV path");

    // score
    auto* score_cmd = app.add_subcommand("score", "score tweets or accounts with a model");
    std::string score_model, score_corpus, score_lexicon, score_out;
    std::string score_mode = "attention", score_scope = "polar", score_level = "tweet";
    score_cmd->add_option("--model", score_model)->required();
    score_cmd->add_option("--corpus", score_corpus)->required();
    score_cmd->add_option("--lexicon", score_lexicon);
    score_cmd->add_option("--out", score_out)->required();
    score_cmd->add_option("--mode", score_mode, "attention|mean");
    score_cmd->add_option("--scope", score_scope, "polar|all");
    score_cmd->add_option("--level", score_level, "tweet|account");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "accuracy and F1 on a labeled corpus");
    std::string eval_model, eval_corpus, eval_lexicon, eval_out;
    std::string eval_mode = "attention", eval_scope = "polar";
    std::size_t eval_folds = 0;
    std::uint64_t eval_fold_seed = 1;
    eval_cmd->add_option("--model", eval_model)->required();
    eval_cmd->add_option("--corpus", eval_corpus)->required();
    eval_cmd->add_option("--lexicon", eval_lexicon);
    eval_cmd->add_option("--out", eval_out, "metrics JSON path");
    eval_cmd->add_option("--mode", eval_mode, "attention|mean");
    eval_cmd->add_option("--scope", eval_scope, "polar|all");
    eval_cmd->add_option("--folds", eval_folds,
                         "k-fold cross validation (retrains with the model's config)");
    eval_cmd->add_option("--fold-seed", eval_fold_seed, "seed for the fold partition");

    // export
    auto* export_cmd = app.add_subcommand("export", "write embeddings in word2vec text format");
    std::string export_model, export_out, export_format = "text";
    export_cmd->add_option("--model", export_model)->required();
    export_cmd->add_option("--out", export_out)->required();
    export_cmd->add_option("--format", export_format, "text");

    // report
    auto* report_cmd = app.add_subcommand("report", "periods|groups|kde|bias analyses");
    std::string report_model, report_corpus, report_lexicon, report_out, report_kind;
    std::string report_mode = "attention", report_scope = "polar";
    std::string report_groups, report_keywords;
    int report_period_days = 7;
    std::size_t report_grid_points = 512;
    report_cmd->add_option("--model", report_model)->required();
    report_cmd->add_option("--corpus", report_corpus)->required();
    report_cmd->add_option("--lexicon", report_lexicon);
    report_cmd->add_option("--out", report_out)->required();
    report_cmd->add_option("--report", report_kind, "periods|groups|kde|bias")->required();
    report_cmd->add_option("--mode", report_mode, "attention|mean");
    report_cmd->add_option("--scope", report_scope, "polar|all");
    report_cmd->add_option("--period-days", report_period_days);
    report_cmd->add_option("--groups", report_groups, "TSV account<TAB>group");
    report_cmd->add_option("--keywords", report_keywords, "keyword list, one per line");
    report_cmd->add_option("--grid-points", report_grid_points);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_source, train_paths);
        if (score_cmd->parsed())
            return cmd_score(score_model, score_corpus, score_lexicon, score_out, score_mode,
                             score_scope, score_level);
        if (eval_cmd->parsed())
            return cmd_eval(eval_model, eval_corpus, eval_lexicon, eval_out, eval_mode, eval_scope,
                            eval_folds, eval_fold_seed);
        if (export_cmd->parsed()) return cmd_export(export_model, export_out, export_format);
        if (report_cmd->parsed())
            return cmd_report(report_model, report_corpus, report_lexicon, report_out, report_kind,
                              report_mode, report_scope, report_period_days, report_groups,
                              report_keywords, report_grid_points);
    } catch (const pem::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitUsage;
}

// segdiv: command-line front end for corpus preparation, ambiguity scoring,
// redundancy planning, strategy simulation and the collection server.

#include <algorithm>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segdiv/http_service.hpp"
#include "segdiv/segdiv.hpp"

namespace fs = std::filesystem;
using namespace segdiv;

namespace {

struct Common {
    std::string manifest;
    std::string scores;
    std::string out;
    std::string format;
    std::string measure = "region";
    std::string strategy;
    std::size_t budget = 0;
    std::size_t extra = 4;
    std::uint64_t seed = 0;
    std::size_t seeds = 20;
    std::string thresholds;
};

ReportFormat output_format(const Common& c) {
    return c.format.empty() ? format_from_extension(c.out) : parse_report_format(c.format);
}

void emit(const Report& report, const Common& c) {
    if (c.out.empty()) {
        if (report.rows.empty()) {
            throw error(errc::empty_results, "nothing to report");
        }
        std::cout << render_report(report, c.format.empty() ? ReportFormat::csv : parse_report_format(c.format));
        return;
    }
    emit_report(report, c.out, output_format(c));
}

/// "0,0.5,1" or "start:stop:step" (inclusive of stop within rounding).
std::vector<double> parse_thresholds(const std::string& spec) {
    if (spec.empty()) {
        return default_thresholds();
    }
    if (spec.find(':') != std::string::npos) {
        const auto parts = detail::split(spec, ':');
        if (parts.size() != 3) {
            throw error(errc::parse_error, "thresholds range is start:stop:step");
        }
        const double lo = detail::parse_double(parts[0], "--thresholds");
        const double hi = detail::parse_double(parts[1], "--thresholds");
        const double step = detail::parse_double(parts[2], "--thresholds");
        if (!(step > 0.0) || hi < lo) {
            throw error(errc::parse_error, "thresholds range needs step > 0 and stop >= start");
        }
        std::vector<double> out;
        const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
        for (std::size_t i = 0; i <= count; ++i) {
            out.push_back(lo + static_cast<double>(i) * step);
        }
        return out;
    }
    std::vector<double> out;
    for (auto part : detail::split(spec, ',')) {
        out.push_back(detail::parse_double(part, "--thresholds"));
    }
    return out;
}

std::vector<std::string> parse_list(const std::string& spec) {
    std::vector<std::string> out;
    for (auto part : detail::split(spec, ',')) {
        if (!part.empty()) {
            out.emplace_back(part);
        }
    }
    return out;
}

fs::path image_path(const fs::path& manifest, const ImageRecord& r) {
    fs::path p = r.path;
    return p.is_relative() ? manifest.parent_path() / p : p;
}

std::vector<ImageId> ids_of(const Manifest& m) {
    std::vector<ImageId> ids;
    for (const auto& r : m) {
        ids.push_back(r.image_id);
    }
    return ids;
}

/// Annotation pools restricted to images carrying at least 1 + extra masks.
AnnotationSets pools(const Manifest& manifest, std::size_t extra) {
    AnnotationSets sets;
    for (const auto& r : manifest) {
        if (r.annotations.size() < 1 + extra) {
            throw error(errc::insufficient_annotations, r.image_id + " has " + std::to_string(r.annotations.size()) +
                                                            " annotations; simulation needs " +
                                                            std::to_string(1 + extra));
        }
        sets.emplace(r.image_id, AnnotationSet(r.image_id, decode_annotations(r)));
    }
    return sets;
}

std::map<ImageId, double> load_scores(const Common& c, const Manifest& manifest) {
    if (c.scores.empty()) {
        throw error(errc::missing_score, "--scores is required for the greedy strategy");
    }
    return ingest_scores(c.scores, image_ids(manifest));
}

/// One ordering per seed for randomized strategies, one otherwise.
std::vector<std::vector<ImageId>> orderings(const std::string& strategy, const Common& c, const Manifest& manifest,
                                            const DiversityTable* table, Measure m) {
    if (strategy == "greedy") {
        auto scores = load_scores(c, manifest);
        std::vector<ImageId> ids = ids_of(manifest);
        std::map<ImageId, double> subset;
        for (const auto& id : ids) {
            auto it = scores.find(id);
            if (it == scores.end()) {
                throw error(errc::missing_score, "no score for " + id);
            }
            subset.emplace(id, it->second);
        }
        return {greedy_order(subset)};
    }
    if (strategy == "status_quo") {
        std::vector<std::vector<ImageId>> out;
        const auto ids = ids_of(manifest);
        for (std::size_t s = 0; s < c.seeds; ++s) {
            out.push_back(random_order(ids, c.seed + s));
        }
        return out;
    }
    if (strategy == "perfect") {
        if (table == nullptr) {
            throw error(errc::insufficient_annotations, "perfect allocation needs annotation pools");
        }
        return {perfect_order(*table, c.extra, m)};
    }
    throw error(errc::parse_error, "unknown strategy '" + strategy + "'");
}

void add_common_io(CLI::App* app, Common& c) {
    app->add_option("--out,-o", c.out, "Output file (format from extension unless --format)");
    app->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

void add_allocation_flags(CLI::App* app, Common& c) {
    app->add_option("--extra", c.extra, "Redundant annotations per selected image")
        ->check(CLI::IsMember({std::size_t{4}, std::size_t{9}}));
    app->add_option("--measure", c.measure, "Diversity measure")->check(CLI::IsMember({"region", "boundary"}));
    app->add_option("--seed", c.seed, "Seed for randomized strategies");
}

int run_synth(const Common& c, std::size_t images, double fraction, int size, std::size_t pool) {
    SyntheticConfig cfg;
    cfg.images = images;
    cfg.ambiguous_fraction = fraction;
    cfg.width = size;
    cfg.height = size;
    cfg.pool_size = pool;
    cfg.seed = c.seed;
    const auto corpus = synthesize_corpus(cfg);
    const fs::path dir = c.out.empty() ? fs::path("corpus") : fs::path(c.out);
    const auto manifest = write_corpus(corpus, dir / "images", "images/");
    write_manifest(dir / "manifest.jsonl", manifest);
    write_scores(dir / "oracle_scores.tsv", oracle_scores(corpus));
    std::cout << "wrote " << manifest.size() << " images to " << dir.string() << "\n";
    return 0;
}

int run_ingest(const Common& c, const std::string& image_dir, const std::string& mask_dir, const std::string& source) {
    if (c.out.empty()) {
        throw error(errc::parse_error, "--out manifest path is required");
    }
    const fs::path out = c.out;
    const fs::path base = fs::absolute(out).parent_path();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(image_dir)) {
        const auto ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".pgm" || ext == ".pbm" || ext == ".ppm" || ext == ".pnm")) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw error(errc::empty_input, "no PNM images in " + image_dir);
    }
    Manifest manifest;
    for (const auto& f : files) {
        ImageRecord r;
        r.image_id = f.stem().string();
        const auto size = probe_pnm_size(f);
        r.width = size.width;
        r.height = size.height;
        r.source = source;
        r.path = fs::relative(fs::absolute(f), base).generic_string();
        if (!mask_dir.empty()) {
            // Masks named <image_id>.<k>.pbm, taken in ascending k.
            std::map<int, fs::path> masks;
            for (const auto& entry : fs::directory_iterator(mask_dir)) {
                const auto name = entry.path().filename().string();
                const auto prefix = r.image_id + ".";
                if (name.rfind(prefix, 0) == 0 && entry.path().extension() == ".pbm") {
                    const auto k = name.substr(prefix.size(), name.size() - prefix.size() - 4);
                    masks[detail::parse_int(k, name)] = entry.path();
                }
            }
            std::int64_t stamp = 0;
            for (const auto& [k, p] : masks) {
                const auto mask = read_pbm(p);
                r.annotations.push_back({"k" + std::to_string(k), ++stamp, encode_rle(mask)});
            }
        }
        manifest.push_back(image_record_from_json(nlohmann::json::parse(to_json(r).dump())));
    }
    write_manifest(out, manifest);
    std::cout << "wrote " << manifest.size() << " records to " << out.string() << "\n";
    return 0;
}

std::map<ImageId, Ambiguity> labels_for(const Manifest& manifest, const std::string& source) {
    if (source == "judgers") {
        return judger_labels(manifest);
    }
    if (source == "drawers") {
        return drawer_labels(manifest);
    }
    // Otherwise a file of image_id<TAB>unambiguous|ambiguous.
    std::map<ImageId, Ambiguity> out;
    const auto known = image_ids(manifest);
    detail::for_each_record(source, [&](std::string_view line, const std::string& where) {
        const auto f = detail::split(line, '\t');
        if (f.size() != 2) {
            throw error(errc::parse_error, where + ": expected image_id<TAB>label");
        }
        const ImageId id(f[0]);
        detail::check_known(known, id, where);
        out[id] = parse_ambiguity(f[1]);
    });
    return out;
}

int run_train(const Common& c, const std::string& label_source, const std::string& model_out, std::size_t dims,
              std::size_t folds, std::size_t iterations, bool quadratic) {
    const fs::path mpath = c.manifest;
    const auto manifest = read_manifest(mpath);
    const auto labels = labels_for(manifest, label_source);
    std::vector<FeatureVector> features;
    std::vector<int> y;
    for (const auto& r : manifest) {
        auto it = labels.find(r.image_id);
        if (it == labels.end()) {
            continue;
        }
        features.push_back(extract_features(read_pgm(image_path(mpath, r))));
        y.push_back(it->second == Ambiguity::unambiguous ? 1 : -1);
    }
    if (features.size() < min_training_samples) {
        throw error(errc::too_few_samples, "only " + std::to_string(features.size()) + " labelled images");
    }
    AmbiguityModel model;
    const std::size_t limit = std::min({features.front().size(), features.size() - 1, max_pca_dims});
    model.pca = fit_pca(features, std::min(dims, limit));
    std::vector<FeatureVector> projected;
    for (const auto& f : features) {
        projected.push_back(project(model.pca, f));
    }
    TrainerConfig cfg;
    cfg.folds = folds;
    cfg.iterations = iterations;
    cfg.seed = c.seed;
    cfg.quadratic = quadratic;
    const auto trained = train_scorer(projected, y, cfg);
    model.scorer = trained.scorer;
    model.cross_validation = trained.cross_validation;
    write_model(model_out, model);

    Report report;
    report.columns = {"lambda", "mean_average_precision", "folds_scored", "selected"};
    for (const auto& cv : trained.cross_validation) {
        report.add({cv.lambda, cv.mean_average_precision, static_cast<std::int64_t>(cv.folds_scored),
                    static_cast<std::int64_t>(cv.lambda == model.scorer.lambda ? 1 : 0)});
    }
    if (!c.out.empty()) {
        emit(report, c);
    }
    return 0;
}

int run_score(const Common& c, const std::string& model_path, const std::string& detections,
              const std::string& subitizing, const std::string& external, const std::string& method, bool update) {
    const fs::path mpath = c.manifest;
    auto manifest = read_manifest(mpath);
    const auto known = image_ids(manifest);
    const int sources = !model_path.empty() + !detections.empty() + !subitizing.empty() + !external.empty();
    if (sources != 1) {
        throw error(errc::parse_error, "give exactly one of --model, --detections, --subitizing, --external");
    }
    std::map<ImageId, double> scores;
    std::string name = method;
    if (!model_path.empty()) {
        const auto model = read_model(model_path);
        for (const auto& r : manifest) {
            scores[r.image_id] = score_image(model, read_pgm(image_path(mpath, r)));
        }
        name = name.empty() ? "builtin" : name;
    } else if (!detections.empty()) {
        for (const auto& [id, windows] : ingest_detections(detections, known)) {
            scores[id] = feng_unambiguity(windows);
        }
        name = name.empty() ? "feng" : name;
    } else if (!subitizing.empty()) {
        scores = sos_priority_scores(ingest_subitizing(subitizing, known));
        name = name.empty() ? "sos" : name;
    } else {
        scores = ingest_scores(external, known);
        name = name.empty() ? "external" : name;
    }
    if (!c.out.empty()) {
        write_scores(c.out, scores);
    }
    if (update) {
        for (auto& r : manifest) {
            if (auto it = scores.find(r.image_id); it != scores.end()) {
                r.scores[name] = it->second;
            }
        }
        write_manifest(mpath, manifest);
    }
    if (c.out.empty() && !update) {
        for (const auto& [id, s] : scores) {
            std::cout << id << '\t' << format_double(s) << '\n';
        }
    }
    return 0;
}

int run_plan(const Common& c) {
    const auto manifest = read_manifest(c.manifest);
    const Measure m = parse_measure(c.measure);
    const std::string strategy = c.strategy.empty() ? "greedy" : c.strategy;
    AllocationPlan plan;
    std::map<ImageId, double> scores;
    if (strategy == "greedy") {
        scores = load_scores(c, manifest);
        const auto ids = ids_of(manifest);
        plan = greedy_allocate(scores, ids, c.budget, c.extra);
    } else if (strategy == "status_quo") {
        plan = random_allocate(ids_of(manifest), c.budget, c.seed, c.extra);
    } else if (strategy == "perfect") {
        plan = perfect_allocate(pools(manifest, c.extra), c.budget, c.extra, m);
    } else {
        throw error(errc::parse_error, "plan strategies: greedy, status_quo, perfect");
    }
    Report report;
    report.columns = {"strategy", "budget", "extra", "rank", "image_id", "score"};
    for (std::size_t i = 0; i < plan.selected.size(); ++i) {
        const auto& id = plan.selected[i];
        auto it = scores.find(id);
        report.add({plan.strategy, static_cast<std::int64_t>(plan.budget), static_cast<std::int64_t>(plan.extra),
                    static_cast<std::int64_t>(i + 1), id, it == scores.end() ? Cell(std::string()) : Cell(it->second)});
    }
    emit(report, c);
    return 0;
}

std::vector<std::string> strategies_of(const Common& c, const std::vector<std::string>& fallback) {
    auto list = parse_list(c.strategy);
    return list.empty() ? fallback : list;
}

int run_curve(const Common& c, bool per_seed) {
    const auto manifest = read_manifest(c.manifest);
    const Measure m = parse_measure(c.measure);
    const auto sets = pools(manifest, c.extra);
    const auto table = diversity_table(sets);
    const auto thresholds = parse_thresholds(c.thresholds);
    std::vector<std::string> fallback{"status_quo", "perfect", "wp_bb", "wp_seg"};
    if (!c.scores.empty()) {
        fallback.insert(fallback.begin(), "greedy");
    }
    Report report;
    report.columns = {"strategy", "measure", "budget_fraction", "captured_fraction", "seeds_used"};
    for (const auto& s : strategies_of(c, fallback)) {
        DiversityCurve curve;
        if (s == "wp_bb" || s == "wp_seg") {
            curve = wp_curve(sets, table, thresholds, s == "wp_bb" ? AgreementMode::bb : AgreementMode::seg, m, c.extra);
        } else {
            const auto orders = orderings(s, c, manifest, &table, m);
            curve = budget_diversity_curve(s, orders, table, c.extra, m);
            if (per_seed && orders.size() > 1) {
                for (std::size_t k = 0; k < orders.size(); ++k) {
                    const auto one = budget_diversity_curve(s + ":seed=" + std::to_string(c.seed + k),
                                                            std::span(orders).subspan(k, 1), table, c.extra, m);
                    for (const auto& p : one.points) {
                        report.add({one.strategy, std::string(to_string(m)), p.budget_fraction, p.captured_fraction,
                                    std::int64_t{1}});
                    }
                }
            }
        }
        for (const auto& p : curve.points) {
            report.add({curve.strategy, std::string(to_string(m)), p.budget_fraction, p.captured_fraction,
                        static_cast<std::int64_t>(curve.seeds_used)});
        }
    }
    emit(report, c);
    return 0;
}

int run_simulate(const Common& c) {
    const auto manifest = read_manifest(c.manifest);
    const Measure m = parse_measure(c.measure);
    const auto sets = pools(manifest, c.extra);
    const auto table = diversity_table(sets);
    const auto thresholds = parse_thresholds(c.thresholds);
    const std::size_t n = manifest.size();
    const std::size_t budget = std::min(c.budget, n);
    std::vector<std::string> fallback{"status_quo", "perfect", "wp_bb", "wp_seg"};
    if (!c.scores.empty()) {
        fallback.insert(fallback.begin(), "greedy");
    }
    AllocationPlan everything;
    everything.extra = c.extra;
    everything.selected = ids_of(manifest);
    const double full = batch_total_diversity(table, everything).total(m);
    const std::size_t full_cost = n * c.extra;

    Report report;
    report.columns = {"strategy",    "parameter",         "redundant_annotations", "captured",
                      "full_diversity", "captured_fraction", "human_hours_saved"};
    auto add = [&](const std::string& s, Cell param, std::size_t spent, double captured) {
        report.add({s, std::move(param), static_cast<std::int64_t>(spent), captured, full,
                    full > 0.0 ? captured / full : 1.0, human_hours_saved(full_cost - std::min(full_cost, spent))});
    };
    for (const auto& s : strategies_of(c, fallback)) {
        if (s == "wp_bb" || s == "wp_seg") {
            const auto mode = s == "wp_bb" ? AgreementMode::bb : AgreementMode::seg;
            for (double t : thresholds) {
                std::size_t spent = 0;
                double captured = 0.0;
                for (const auto& [id, set] : sets) {
                    const auto pool = std::span<const PixelMask>(set.masks()).first(c.extra + 1);
                    const auto used = wp_simulate(pool, t, mode).consumed;
                    spent += used - 1;
                    for (std::size_t a = 0; a < used; ++a) {
                        captured += measure_value(table.at(id)[a], m);
                    }
                }
                add(s, t, spent, captured);
            }
            continue;
        }
        const auto orders = orderings(s, c, manifest, &table, m);
        double sum = 0.0;
        for (const auto& order : orders) {
            const std::span<const ImageId> chosen(order.data(), budget);
            sum += captured_diversity(table, chosen, c.extra, m);
        }
        add(s, static_cast<std::int64_t>(orders.size()), budget * c.extra, sum / static_cast<double>(orders.size()));
    }
    emit(report, c);
    return 0;
}

int run_report(const Common& c, const std::string& what, const std::string& label_source,
               const std::string& method) {
    const auto manifest = read_manifest(c.manifest);
    Report report;
    if (what == "pr") {
        const auto labels = labels_for(manifest, label_source);
        std::map<ImageId, double> scores;
        if (!c.scores.empty()) {
            scores = ingest_scores(c.scores, image_ids(manifest));
        } else {
            for (const auto& r : manifest) {
                if (auto it = r.scores.find(method); it != r.scores.end()) {
                    scores[r.image_id] = it->second;
                }
            }
        }
        std::map<ImageId, double> scored;
        std::map<ImageId, Ambiguity> labelled;
        for (const auto& [id, label] : labels) {
            if (auto it = scores.find(id); it != scores.end()) {
                scored[id] = it->second;
                labelled[id] = label;
            }
        }
        const auto curve = pr_curve(scored, labelled);
        report.columns = {"threshold", "precision", "recall", "average_precision"};
        for (const auto& p : curve.points) {
            report.add({p.threshold, p.precision, p.recall, curve.average_precision});
        }
    } else if (what == "agreement") {
        const auto judger = judger_labels(manifest);
        const auto drawer = drawer_labels(manifest);
        std::map<ImageId, Ambiguity> j;
        std::map<ImageId, Ambiguity> d;
        for (const auto& [id, label] : judger) {
            if (auto it = drawer.find(id); it != drawer.end()) {
                j[id] = label;
                d[id] = it->second;
            }
        }
        const auto a = agreement_matrix(j, d);
        report.columns = {"judgers", "drawers", "fraction_of_all_images", "images"};
        report.add({std::string("unambiguous"), std::string("unambiguous"), a.judger_u_drawer_u,
                    static_cast<std::int64_t>(a.images)});
        report.add({std::string("unambiguous"), std::string("ambiguous"), a.judger_u_drawer_a,
                    static_cast<std::int64_t>(a.images)});
        report.add({std::string("ambiguous"), std::string("unambiguous"), a.judger_a_drawer_u,
                    static_cast<std::int64_t>(a.images)});
        report.add({std::string("ambiguous"), std::string("ambiguous"), a.judger_a_drawer_a,
                    static_cast<std::int64_t>(a.images)});
        report.add({std::string("overall"), std::string("agreement"), a.overall_agreement,
                    static_cast<std::int64_t>(a.images)});
    } else if (what == "diversity") {
        const auto sets = annotation_sets(manifest);
        const auto table = diversity_table(sets);
        report.columns = {"image_id", "annotation_index", "region_diversity", "boundary_diversity"};
        for (const auto& [id, scores] : table) {
            for (std::size_t i = 0; i < scores.size(); ++i) {
                report.add({id, static_cast<std::int64_t>(i), scores[i].region,
                            scores[i].boundary ? Cell(*scores[i].boundary) : Cell(std::string())});
            }
        }
    } else {
        throw error(errc::parse_error, "report kinds: pr, agreement, diversity");
    }
    emit(report, c);
    return 0;
}

HttpService* active_service = nullptr;

int run_serve(const std::string& log, const std::string& workers, const std::string& host, int port,
              double timeout_minutes) {
    StoreOptions options;
    options.assignment_timeout_ms = static_cast<std::int64_t>(timeout_minutes * 60'000.0);
    CollectionStore store(log, workers.empty() ? WorkerRegistry() : load_worker_registry(workers), options);
    HttpService service(store);
    active_service = &service;
    std::signal(SIGINT, [](int) {
        if (active_service != nullptr) {
            active_service->stop();
        }
    });
    std::signal(SIGTERM, [](int) {
        if (active_service != nullptr) {
            active_service->stop();
        }
    });
    std::cout << "listening on " << host << ":" << port << std::endl;
    const bool ok = service.listen(host, port);
    active_service = nullptr;
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Annotation-redundancy allocation toolkit"};
    app.require_subcommand(1);
    Common c;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with annotation pools");
    std::size_t synth_images = 100;
    double synth_fraction = 0.3;
    int synth_size = 64;
    std::size_t synth_pool = 10;
    synth->add_option("--out,-o", c.out, "Output directory")->required();
    synth->add_option("--images", synth_images, "Number of images");
    synth->add_option("--ambiguous-fraction", synth_fraction, "Share of ambiguous images")->check(CLI::Range(0.0, 1.0));
    synth->add_option("--size", synth_size, "Image side in pixels")->check(CLI::Range(16, 4096));
    synth->add_option("--pool", synth_pool, "Annotations per image");
    synth->add_option("--seed", c.seed, "Generator seed");

    auto* ingest = app.add_subcommand("ingest", "Build a manifest from an image directory");
    std::string ingest_images;
    std::string ingest_masks;
    std::string ingest_source = "ingest";
    ingest->add_option("--images", ingest_images, "Directory of PGM/PBM images")->required()->check(CLI::ExistingDirectory);
    ingest->add_option("--masks", ingest_masks, "Directory of <image_id>.<k>.pbm annotations")
        ->check(CLI::ExistingDirectory);
    ingest->add_option("--source", ingest_source, "Source tag");
    ingest->add_option("--out,-o", c.out, "Manifest to write")->required();

    auto* train = app.add_subcommand("train", "Fit PCA and the linear ambiguity scorer");
    std::string train_labels = "judgers";
    std::string train_model;
    std::size_t train_dims = 50;
    std::size_t train_folds = 5;
    std::size_t train_iterations = 1000;
    bool train_quadratic = false;
    train->add_option("--manifest,-m", c.manifest, "Manifest")->required()->check(CLI::ExistingFile);
    train->add_option("--labels", train_labels, "judgers, drawers, or a file of image_id<TAB>label");
    train->add_option("--model", train_model, "Model JSON to write")->required();
    train->add_option("--dims", train_dims, "PCA dimensions (clamped to what the data allows)");
    train->add_option("--folds", train_folds, "Cross-validation folds");
    train->add_option("--iterations", train_iterations, "Optimizer iterations per fit");
    train->add_flag("--quadratic", train_quadratic, "Use degree-2 feature expansion");
    train->add_option("--seed", c.seed, "Fold assignment seed");
    add_common_io(train, c);

    auto* score = app.add_subcommand("score", "Produce unambiguity scores");
    std::string score_model;
    std::string score_detections;
    std::string score_subitizing;
    std::string score_external;
    std::string score_method;
    bool score_update = false;
    score->add_option("--manifest,-m", c.manifest, "Manifest")->required()->check(CLI::ExistingFile);
    score->add_option("--model", score_model, "Built-in model JSON")->check(CLI::ExistingFile);
    score->add_option("--detections", score_detections, "Detection windows file")->check(CLI::ExistingFile);
    score->add_option("--subitizing", score_subitizing, "Subitizing distributions file")->check(CLI::ExistingFile);
    score->add_option("--external", score_external, "Scores file image_id<TAB>score")->check(CLI::ExistingFile);
    score->add_option("--method", score_method, "Name stored in the manifest");
    score->add_flag("--update", score_update, "Store the scores in the manifest");
    score->add_option("--out,-o", c.out, "Scores file to write");

    auto* plan = app.add_subcommand("plan", "Select images for redundant annotation");
    plan->add_option("--manifest,-m", c.manifest, "Manifest")->required()->check(CLI::ExistingFile);
    plan->add_option("--scores", c.scores, "Scores file")->check(CLI::ExistingFile);
    plan->add_option("--budget", c.budget, "Images to receive extra annotations")->required();
    plan->add_option("--strategy", c.strategy, "greedy, status_quo or perfect");
    add_allocation_flags(plan, c);
    add_common_io(plan, c);

    auto* simulate = app.add_subcommand("simulate", "Compare strategies at one budget over stored pools");
    simulate->add_option("--manifest,-m", c.manifest, "Manifest")->required()->check(CLI::ExistingFile);
    simulate->add_option("--scores", c.scores, "Scores file")->check(CLI::ExistingFile);
    simulate->add_option("--budget", c.budget, "Images to receive extra annotations")->required();
    simulate->add_option("--strategy", c.strategy, "Comma-separated strategies");
    simulate->add_option("--seeds", c.seeds, "Seeds averaged for status_quo");
    simulate->add_option("--thresholds", c.thresholds, "Agreement thresholds: list or start:stop:step");
    add_allocation_flags(simulate, c);
    add_common_io(simulate, c);

    auto* curve = app.add_subcommand("curve", "Budget-versus-diversity curves");
    curve->add_option("--manifest,-m", c.manifest, "Manifest")->required()->check(CLI::ExistingFile);
    curve->add_option("--scores", c.scores, "Scores file")->check(CLI::ExistingFile);
    curve->add_option("--strategy", c.strategy, "Comma-separated strategies");
    curve->add_option("--seeds", c.seeds, "Seeds averaged for status_quo");
    curve->add_option("--thresholds", c.thresholds, "Agreement thresholds: list or start:stop:step");
    bool curve_per_seed = false;
    curve->add_flag("--per-seed", curve_per_seed, "Also emit each seed's curve for randomized strategies");
    add_allocation_flags(curve, c);
    add_common_io(curve, c);

    auto* serve = app.add_subcommand("serve", "Run the collection server");
    std::string serve_log = "events.jsonl";
    std::string serve_workers;
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    double serve_timeout = 30.0;
    serve->add_option("--log", serve_log, "Event log");
    serve->add_option("--workers", serve_workers, "Worker profile JSON")->check(CLI::ExistingFile);
    serve->add_option("--host", serve_host, "Bind address");
    serve->add_option("--port", serve_port, "Port");
    serve->add_option("--timeout-minutes", serve_timeout, "Assignment timeout");

    auto* report = app.add_subcommand("report", "Evaluation tables");
    std::string report_what = "pr";
    std::string report_labels = "judgers";
    std::string report_method = "builtin";
    report->add_option("--manifest,-m", c.manifest, "Manifest")->required()->check(CLI::ExistingFile);
    report->add_option("--kind", report_what, "pr, agreement or diversity")
        ->check(CLI::IsMember({"pr", "agreement", "diversity"}));
    report->add_option("--labels", report_labels, "judgers, drawers, or a label file");
    report->add_option("--scores", c.scores, "Scores file (else manifest scores under --method)");
    report->add_option("--method", report_method, "Manifest score method");
    add_common_io(report, c);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            return run_synth(c, synth_images, synth_fraction, synth_size, synth_pool);
        }
        if (*ingest) {
            return run_ingest(c, ingest_images, ingest_masks, ingest_source);
        }
        if (*train) {
            return run_train(c, train_labels, train_model, train_dims, train_folds, train_iterations, train_quadratic);
        }
        if (*score) {
            return run_score(c, score_model, score_detections, score_subitizing, score_external, score_method,
                             score_update);
        }
        if (*plan) {
            return run_plan(c);
        }
        if (*simulate) {
            return run_simulate(c);
        }
        if (*curve) {
            return run_curve(c, curve_per_seed);
        }
        if (*serve) {
            return run_serve(serve_log, serve_workers, serve_host, serve_port, serve_timeout);
        }
        if (*report) {
            return run_report(c, report_what, report_labels, report_method);
        }
    } catch (const error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

#pragma once

// JSON-over-HTTP front end for CollectionStore.
//
//   POST /batches                    {"manifest", "kind", "extra", "assignments"?}
//   GET  /tasks/next?worker=W        {"task": {...} | null}
//   POST /tasks/{id}/vote            {"worker_id", "votes": [bool x n]}
//   POST /tasks/{id}/segmentation    {"worker_id", "polygons": [[[x, y], ...]]}
//   GET  /batches/{id}/status
//   GET  /batches/{id}/report?format=json|csv
//   POST /batches/{id}/rounds        {"budget", "extra", "method", "scores"?}
//
// Failures answer {"error": "<ErrorName>", "message": "..."}.

#include <map>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

// <resolv.h> defines _res as a macro, which breaks Eigen parameter names.
#ifdef _res
#undef _res
#endif

#include "segdiv/collection_store.hpp"
#include "segdiv/error.hpp"
#include "segdiv/mask.hpp"
#include "segdiv/report.hpp"

namespace segdiv {

inline int http_status(errc code) noexcept {
    switch (code) {
    case errc::ineligible_worker:
        return 403;
    case errc::unknown_task:
    case errc::unknown_batch:
    case errc::unknown_image:
    case errc::missing_image:
        return 404;
    case errc::not_assigned:
    case errc::wrong_kind:
    case errc::vote_cap_reached:
    case errc::annotation_cap_reached:
    case errc::round_one_incomplete:
    case errc::duplicate_worker:
        return 409;
    case errc::io_failure:
        return 500;
    default:
        return 400;
    }
}

/// Vertices as [[x, y], ...].
inline PolygonOutline polygon_from_json(const nlohmann::json& j) {
    PolygonOutline poly;
    for (const auto& v : j) {
        if (!v.is_array() || v.size() != 2) {
            throw error(errc::parse_error, "polygon vertices are [x, y] pairs");
        }
        poly.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    return poly;
}

class HttpService {
public:
    explicit HttpService(CollectionStore& store) : store_(store) { routes(); }

    httplib::Server& server() noexcept { return server_; }

    bool listen(const std::string& host, int port) { return server_.listen(host, port); }
    int bind_to_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }

private:
    template <typename Fn>
    static void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const error& e) {
            fail(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
        } catch (const nlohmann::json::exception& e) {
            fail(res, 400, "ParseError", e.what());
        }
    }

    static void fail(httplib::Response& res, int status, const std::string& name, const std::string& message) {
        res.status = status;
        res.set_content(nlohmann::ordered_json{{"error", name}, {"message", message}}.dump(), "application/json");
    }

    static void reply(httplib::Response& res, const nlohmann::ordered_json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static nlohmann::json body_of(const httplib::Request& req) {
        try {
            return nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
            throw error(errc::parse_error, std::string("request body: ") + e.what());
        }
    }

    nlohmann::ordered_json task_view(const Task& t) const {
        auto j = to_json(t);
        j["images"] = nlohmann::ordered_json::array();
        for (const auto& id : t.image_ids) {
            const auto rec = store_.image(id);
            j["images"].push_back({{"image_id", id},
                                   {"width", rec ? rec->width : 0},
                                   {"height", rec ? rec->height : 0},
                                   {"path", rec ? rec->path : std::string()}});
        }
        return j;
    }

    void routes() {
        server_.Post("/batches", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = body_of(req);
                const auto kind = parse_task_kind(body.at("kind").get<std::string>());
                const auto id = store_.create_batch(body.at("manifest").get<std::string>(), kind,
                                                    body.value("extra", std::size_t{4}),
                                                    body.value("assignments", std::size_t{1}));
                reply(res, {{"batch_id", id}, {"status", to_json(store_.status(id))}}, 201);
            });
        });

        server_.Get("/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                if (!req.has_param("worker")) {
                    throw error(errc::parse_error, "missing worker parameter");
                }
                const auto task = store_.next_task(req.get_param_value("worker"));
                reply(res, {{"task", task ? task_view(*task) : nlohmann::ordered_json(nullptr)}});
            });
        });

        server_.Post(R"(/tasks/([^/]+)/vote)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = body_of(req);
                const auto votes = body.at("votes").get<std::vector<bool>>();
                const auto labels = store_.submit_vote(req.matches[1], body.at("worker_id").get<std::string>(), votes);
                nlohmann::ordered_json out = nlohmann::ordered_json::object();
                for (const auto& [id, label] : labels) {
                    out[id] = to_string(label);
                }
                reply(res, {{"task_id", std::string(req.matches[1])}, {"labels", out}});
            });
        });

        server_.Post(R"(/tasks/([^/]+)/segmentation)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = body_of(req);
                std::vector<PolygonOutline> polygons;
                if (body.contains("polygons")) {
                    for (const auto& p : body.at("polygons")) {
                        polygons.push_back(polygon_from_json(p));
                    }
                } else if (body.contains("polygon")) {
                    polygons.push_back(polygon_from_json(body.at("polygon")));
                }
                const auto receipt =
                    store_.submit_segmentation(req.matches[1], body.at("worker_id").get<std::string>(), polygons);
                reply(res, {{"task_id", std::string(req.matches[1])},
                            {"image_id", receipt.image_id},
                            {"timestamp", receipt.timestamp},
                            {"pixels", receipt.pixels}});
            });
        });

        server_.Get(R"(/batches/([^/]+)/status)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, to_json(store_.status(req.matches[1]))); });
        });

        server_.Get(R"(/batches/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto format =
                    req.has_param("format") ? parse_report_format(req.get_param_value("format")) : ReportFormat::json;
                const auto report = store_.report(req.matches[1]);
                res.status = 200;
                res.set_content(render_report(report, format),
                                format == ReportFormat::json ? "application/json" : "text/csv");
            });
        });

        server_.Post(R"(/batches/([^/]+)/rounds)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto body = body_of(req);
                const std::string batch_id = req.matches[1];
                const auto method = body.value("method", std::string("external"));
                std::map<ImageId, double> scores;
                std::string record_as;
                if (body.contains("scores")) {
                    scores = body.at("scores").get<std::map<ImageId, double>>();
                    record_as = method;
                } else {
                    for (const auto& rec : store_.manifest()) {
                        if (auto it = rec.scores.find(method); it != rec.scores.end()) {
                            scores[rec.image_id] = it->second;
                        }
                    }
                }
                const auto result = store_.run_adaptive_round(batch_id, scores, record_as,
                                                              body.at("budget").get<std::size_t>(),
                                                              body.value("extra", std::size_t{4}));
                reply(res, {{"plan", to_json(result.plan)}, {"opened_tasks", result.opened_tasks}});
            });
        });
    }

    CollectionStore& store_;
    httplib::Server server_;
};

} // namespace segdiv

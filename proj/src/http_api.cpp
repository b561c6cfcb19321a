#include "ital/http_api.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace ital {
using nlohmann::json;

namespace {

json sample_json(const SampleView& s) {
    json j{{"id", s.id}, {"sample_id", s.sample_id}, {"score", s.score}};
    if (!s.image_url.empty()) {
        j["image_url"] = s.image_url;
    }
    return j;
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

Index parse_index(const json& j, const char* what) {
    if (j.is_number_unsigned()) {
        return j.get<Index>();
    }
    if (j.is_number_integer() && j.get<long long>() >= 0) {
        return static_cast<Index>(j.get<long long>());
    }
    throw ContractError(std::string(what) + " must be a nonnegative integer");
}

IdList parse_ids(const json& body, const char* key) {
    IdList out;
    if (!body.contains(key) || body.at(key).is_null()) {
        return out;
    }
    if (!body.at(key).is_array()) {
        throw ContractError(std::string(key) + " must be an array of sample ids");
    }
    for (const auto& v : body.at(key)) {
        out.push_back(parse_index(v, key));
    }
    return out;
}

Index parse_index_text(const std::string& s, const char* what) {
    if (s.empty() || s.size() > 18 || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ContractError(std::string(what) + " must be a nonnegative integer");
    }
    return static_cast<Index>(std::stoull(s));
}

const char* mime_of(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    for (auto& c : ext) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".gif") return "image/gif";
    if (ext == ".bmp") return "image/bmp";
    if (ext == ".webp") return "image/webp";
    return "application/octet-stream";
}

/// Runs a handler and maps the error hierarchy onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const NotFoundError& e) {
        send_error(res, 404, "not_found", e.what());
    } catch (const ConflictError& e) {
        send_error(res, 409, "conflict", e.what());
    } catch (const ContractError& e) {
        send_error(res, 400, "invalid_request", e.what());
    } catch (const ConfigError& e) {
        send_error(res, 400, "invalid_request", e.what());
    } catch (const CapacityError& e) {
        send_error(res, 400, "capacity", e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, "invalid_json", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

}  // namespace

struct HttpApi::Impl {
    FeedbackService& service;
    httplib::Server server;

    explicit Impl(FeedbackService& s) : service(s) {}

    void routes(const std::filesystem::path& static_dir) {
        server.Get("/api/datasets", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] {
                json out = json::array();
                for (const auto& d : service.datasets()) {
                    out.push_back({{"name", d.name}, {"n", d.n}, {"d", d.d}, {"has_images", d.has_images}});
                }
                send_json(res, out);
            });
        });

        server.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const json body = json::parse(req.body);
                if (!body.is_object()) {
                    throw ContractError("request body must be a JSON object");
                }
                CreateSessionRequest r;
                r.dataset = body.at("dataset").get<std::string>();
                r.query_ids = parse_ids(body, "query_ids");
                r.negative_ids = parse_ids(body, "negative_ids");
                if (body.contains("k")) {
                    r.k = parse_index(body.at("k"), "k");
                    if (r.k == 0) {
                        throw ContractError("k must be positive");
                    }
                }
                if (body.contains("strategy")) {
                    r.strategy = parse_strategy(body.at("strategy").get<std::string>());
                }
                r.user.p_label = body.value("p_label", 1.0);
                r.user.p_mistake = body.value("p_mistake", 0.0);
                if (body.contains("pool_size")) {
                    r.pool_size = parse_index(body.at("pool_size"), "pool_size");
                }
                send_json(res, {{"session_id", service.create_session(r)}}, 201);
            });
        });

        server.Get(R"(/api/sessions/([0-9a-fA-F]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto s = service.session(req.matches[1]);
                send_json(res, {{"session_id", s.session_id},
                                {"dataset", s.dataset},
                                {"round", s.round},
                                {"k", s.k},
                                {"strategy", to_string(s.strategy)},
                                {"p_label", s.user.p_label},
                                {"p_mistake", s.user.p_mistake},
                                {"labeled_count", s.labeled_count},
                                {"status", s.status}});
            });
        });

        server.Get(R"(/api/sessions/([0-9a-fA-F]+)/candidates)",
                   [this](const httplib::Request& req, httplib::Response& res) {
                       guarded(res, [&] {
                           const bool wait = req.has_param("wait") && req.get_param_value("wait") != "0" &&
                                             req.get_param_value("wait") != "false";
                           const auto v = service.candidates(req.matches[1], wait);
                           json out{{"status", to_string(v.status)}, {"exhausted", v.exhausted}};
                           json c = json::array();
                           for (const auto& s : v.candidates) {
                               c.push_back(sample_json(s));
                           }
                           out["candidates"] = std::move(c);
                           if (v.status == CandidateStatus::computing) {
                               out["retry_after_ms"] = 500;
                               res.set_header("Retry-After", "1");
                           }
                           if (!v.error.empty()) {
                               out["error"] = {{"code", "selection_failed"}, {"message", v.error}};
                           }
                           send_json(res, out, v.status == CandidateStatus::computing ? 202 : 200);
                       });
                   });

        server.Post(R"(/api/sessions/([0-9a-fA-F]+)/feedback)",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        guarded(res, [&] {
                            const json body = json::parse(req.body);
                            if (!body.is_object() || !body.contains("labels") || !body.at("labels").is_object()) {
                                throw ContractError("body must contain a labels object");
                            }
                            std::map<Index, int> labels;
                            for (const auto& [key, value] : body.at("labels").items()) {
                                if (!value.is_number_integer()) {
                                    throw ContractError("feedback values must be -1, 0 or 1");
                                }
                                labels[parse_index_text(key, "candidate id")] = value.get<int>();
                            }
                            const std::string token = body.value("idempotency_token", "");
                            const auto r = service.submit_feedback(req.matches[1], labels, token);
                            send_json(res, {{"round", r.round}, {"labeled_count", r.labeled_count},
                                            {"replayed", r.replayed}});
                        });
                    });

        server.Get(R"(/api/sessions/([0-9a-fA-F]+)/ranking)", [this](const httplib::Request& req,
                                                                     httplib::Response& res) {
            guarded(res, [&] {
                std::size_t limit = 50;
                if (req.has_param("limit")) {
                    limit = parse_index_text(req.get_param_value("limit"), "limit");
                }
                const bool all = req.has_param("all") && req.get_param_value("all") != "0" &&
                                 req.get_param_value("all") != "false";
                json out = json::array();
                for (const auto& s : service.ranking(req.matches[1], limit, all)) {
                    out.push_back(sample_json(s));
                }
                send_json(res, out);
            });
        });

        server.Get(R"(/images/([^/]+)/([0-9]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto& ds = service.dataset(req.matches[1]);
                const Index id = parse_index_text(req.matches[2], "sample id");
                if (!ds.has_images() || id >= ds.size()) {
                    throw NotFoundError("no image for sample " + std::to_string(id));
                }
                const std::filesystem::path p = ds.image_paths[id];
                std::ifstream in(p, std::ios::binary);
                if (!in) {
                    throw NotFoundError("image file missing for sample " + std::to_string(id));
                }
                std::ostringstream buf;
                buf << in.rdbuf();
                res.set_content(buf.str(), mime_of(p));
            });
        });

        if (!static_dir.empty()) {
            server.set_mount_point("/", static_dir.string());
        }
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                send_error(res, res.status, res.status == 404 ? "not_found" : "error", "no such resource");
            }
        });
    }
};

HttpApi::HttpApi(FeedbackService& service, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(service)) {
    impl_->routes(static_dir);
}

HttpApi::~HttpApi() { stop(); }

int HttpApi::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) {
            throw Error("cannot bind to " + host);
        }
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw Error("cannot bind to " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpApi::listen() { impl_->server.listen_after_bind(); }

void HttpApi::stop() {
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
}

}  // namespace ital

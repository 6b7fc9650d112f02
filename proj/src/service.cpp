#include "latticework/service.hpp"

#include "latticework/error.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace lw {

using nlohmann::json;

namespace {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound:
        case ErrorCode::NodeNotFound:       return 404;
        case ErrorCode::InvalidStatus:
        case ErrorCode::MissingPredecessor: return 409;
        case ErrorCode::RatingOutOfRange:
        case ErrorCode::InvalidInput:
        case ErrorCode::EmptyNote:          return 422;
        default:                            return 500;
    }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
    send_json(res, {{"error", code}, {"message", message}}, status);
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) throw Error(ErrorCode::InvalidInput, "request body must be a JSON object");
    return body;
}

json insight_json(const Insight& in) {
    return {{"id", in.id},
            {"layer_index", in.layer_index},
            {"title", in.title},
            {"description", in.description},
            {"evidence", in.evidence},
            {"contexts", in.contexts},
            {"carried_forward", in.carried_forward}};
}

} // namespace

struct Service::Impl {
    Engine& engine;
    httplib::Server server;
    std::thread listener;
    std::mutex runs_mutex;
    std::vector<std::thread> runs;
    std::atomic<bool> stopping{false};
    std::string token;

    explicit Impl(Engine& e) : engine(e) {
        if (const char* t = std::getenv(engine.config().server.token_env.c_str())) token = t;
        routes();
    }

    // Wraps a handler with auth and error mapping.
    template <typename F>
    httplib::Server::Handler guarded(F fn) {
        return [this, fn](const httplib::Request& req, httplib::Response& res) {
            if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
                send_error(res, 401, "Unauthorized", "missing or wrong bearer token");
                return;
            }
            try {
                fn(req, res);
            } catch (const Error& e) {
                send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, "BadRequest", e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "InternalError", e.what());
            }
        };
    }

    void routes() {
        server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
            json out = json::array();
            for (const auto& b : engine.sessions())
                out.push_back({{"session_id", b.session_id},
                               {"policy", to_string(b.policy)},
                               {"record_count", b.records.size()},
                               {"chunk_count", b.chunks.size()},
                               {"first", format_rfc3339(b.records.front().timestamp)},
                               {"last", format_rfc3339(b.records.back().timestamp)}});
            send_json(res, out);
        }));

        server.Get("/lattice/:scope", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto& scope = req.path_params.at("scope");
            if (scope == "final") return send_json(res, to_json(engine.final_lattice()));
            auto l = engine.store().load_lattice(scope);
            if (!l) throw Error(ErrorCode::NotFound, "no lattice " + scope);
            send_json(res, to_json(*l));
        }));

        server.Get("/insights", guarded([this](const httplib::Request&, httplib::Response& res) {
            json out = json::array();
            for (const auto& in : engine.final_insights()) out.push_back(insight_json(in));
            send_json(res, out);
        }));

        server.Get("/insights/:id/provenance", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, engine.provenance(req.path_params.at("id")));
        }));

        server.Get("/tasks", guarded([this](const httplib::Request&, httplib::Response& res) {
            auto doc = engine.store().read_json("tasks/tasks.json");
            if (!doc) throw Error(ErrorCode::MissingPredecessor, "tasks have not been generated");
            send_json(res, *doc);
        }));

        server.Get("/actions", guarded([this](const httplib::Request&, httplib::Response& res) {
            json out = json::array();
            for (const auto& a : engine.actions()) out.push_back(to_json(a));
            send_json(res, out);
        }));

        server.Get("/actions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, to_json(engine.action(req.path_params.at("id"))));
        }));

        server.Post("/actions/:id/steer", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req);
            if (!body.contains("note") || !body.at("note").is_string())
                throw Error(ErrorCode::InvalidInput, "body needs a string field 'note'");
            send_json(res, to_json(engine.steer(req.path_params.at("id"), body.at("note").get<std::string>())));
        }));

        server.Post("/actions/:id/approve", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, to_json(engine.approve(req.path_params.at("id"))));
        }));

        server.Post("/actions/:id/run", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.path_params.at("id");
            const std::string run_id = engine.start_run(id);
            {
                std::lock_guard lock(runs_mutex);
                runs.emplace_back([this, id] {
                    try {
                        engine.execute_run(id);
                    } catch (const std::exception& e) {
                        spdlog::error("run of action {} failed: {}", id, e.what());
                    }
                });
            }
            send_json(res, {{"run_id", run_id}, {"action_id", id}, {"status", "running"}}, 202);
        }));

        server.Get("/runs/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto& rid = req.path_params.at("id");
            if (auto doc = engine.run_summary(rid)) return send_json(res, *doc);
            if (!run_known(rid)) throw Error(ErrorCode::NotFound, "no run " + rid);
            send_json(res, {{"run_id", rid}, {"outcome", nullptr}, {"status", "running"},
                            {"step_count", engine.run_trace(rid).size()}});
        }));

        server.Get("/runs/:id/trace", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string rid = req.path_params.at("id");
            if (!run_known(rid)) throw Error(ErrorCode::NotFound, "no run " + rid);
            std::size_t resume = 0;
            if (req.has_header("Last-Event-ID")) resume = std::stoul(req.get_header_value("Last-Event-ID"));
            res.set_header("Cache-Control", "no-cache");
            auto sent = std::make_shared<std::size_t>(resume);
            res.set_chunked_content_provider("text/event-stream", [this, rid, sent](std::size_t, httplib::DataSink& sink) {
                while (!stopping) {
                    const bool done = engine.run_summary(rid).has_value();
                    for (const auto& step : engine.run_trace(rid)) {
                        const auto seq = step.at("seq").get<std::size_t>();
                        if (seq <= *sent) continue;
                        if (seq != *sent + 1) break;  // wait for the gap to fill
                        const std::string ev = "id: " + std::to_string(seq) + "\nevent: step\ndata: " + step.dump() + "\n\n";
                        if (!sink.write(ev.data(), ev.size())) return false;
                        *sent = seq;
                    }
                    if (done) {
                        const std::string ev = "event: end\ndata: " + engine.run_summary(rid)->dump() + "\n\n";
                        sink.write(ev.data(), ev.size());
                        sink.done();
                        return true;
                    }
                    std::this_thread::sleep_for(std::chrono::milliseconds(50));
                }
                sink.done();
                return true;
            });
        }));

        server.Get("/ratings", guarded([this](const httplib::Request&, httplib::Response& res) {
            send_json(res, engine.ratings());
        }));

        server.Post("/ratings", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req);
            for (const char* f : {"subject", "dimension"})
                if (!body.contains(f) || !body.at(f).is_string())
                    throw Error(ErrorCode::InvalidInput, std::string("body needs a string field '") + f + "'");
            if (!body.contains("value") || !body.at("value").is_number_integer())
                throw Error(ErrorCode::InvalidInput, "body needs an integer field 'value'");
            std::optional<std::string> note;
            if (body.contains("rater_note") && body.at("rater_note").is_string()) note = body.at("rater_note").get<std::string>();
            auto r = engine.add_rating(body.at("subject").get<std::string>(), body.at("dimension").get<std::string>(),
                                       body.at("value").get<int>(), note);
            send_json(res, to_json(r), 201);
        }));
    }

    bool run_known(const std::string& rid) {
        if (engine.run_summary(rid)) return true;
        for (const auto& a : engine.actions())
            if (a.run_id == rid) return true;
        return false;
    }

    void join_runs() {
        std::vector<std::thread> pending;
        {
            std::lock_guard lock(runs_mutex);
            pending.swap(runs);
        }
        for (auto& t : pending)
            if (t.joinable()) t.join();
    }
};

Service::Service(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {}

Service::~Service() { stop(); }

bool Service::listen(const std::string& host, int port) {
    spdlog::info("serving on http://{}:{}", host, port);
    return impl_->server.listen(host, port);
}

int Service::start_background(const std::string& host) {
    int port = impl_->server.bind_to_any_port(host);
    if (port <= 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
    impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void Service::stop() {
    if (!impl_) return;
    impl_->stopping = true;
    impl_->server.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
    impl_->join_runs();
}

} // namespace lw

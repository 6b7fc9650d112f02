// latticework: batch CLI over the engine store, plus the HTTP service.

#include "latticework/engine.hpp"
#include "latticework/error.hpp"
#include "latticework/service.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

struct Overrides {
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::string> named;  // config key -> raw value
    std::string log_level = "warn";
};

// Named flags are shorthands for "--set section.key=value".
void add_named(CLI::App& app, Overrides& o, const std::string& flag, const std::string& key, const std::string& help) {
    app.add_option_function<std::string>(flag, [&o, key](const std::string& v) { o.named[key] = v; }, help + " (" + key + ")");
}

lw::Config make_config(const Overrides& o) {
    lw::Config cfg = o.config_path.empty() ? lw::Config{} : lw::load_config(o.config_path);
    for (const auto& [key, value] : o.named) cfg.set_from_string(key, value);
    for (const auto& s : o.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos) throw lw::Error(lw::ErrorCode::ConfigError, "--set expects key=value, got " + s);
        cfg.set_from_string(s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.check();
    return cfg;
}

json task_list(const std::vector<lw::Task>& tasks) {
    json out = json::array();
    for (const auto& t : tasks) out.push_back(lw::to_json(t));
    return out;
}

json action_list(const std::vector<lw::ProposedAction>& actions) {
    json out = json::array();
    for (const auto& a : actions) out.push_back(lw::to_json(a));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latticework: behavior lattice engine"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("-c,--config", o.config_path, "TOML config file")->check(CLI::ExistingFile);
    app.add_option("--set", o.sets, "Override any config key: section.key=value");
    app.add_option("--log-level", o.log_level, "trace|debug|info|warn|error|off");
    add_named(app, o, "--store", "store.root", "Store root directory");
    add_named(app, o, "--endpoint", "backend.endpoint_url", "Model endpoint base URL, or mock:");
    add_named(app, o, "--timezone", "ingest.timezone", "Timezone for calendar-day sessions");
    add_named(app, o, "--session-policy", "ingest.session_policy", "calendar_day or chat_thread");
    add_named(app, o, "--window-size", "ingest.window_size", "Records per observation window");
    add_named(app, o, "--max-layers", "synthesis.max_layers", "Lattice depth including the observation layer");
    add_named(app, o, "--user-name", "synthesis.user_name", "Name used for the user in prompts");
    add_named(app, o, "--task-day", "tasking.task_day", "Session id used for task inference");
    add_named(app, o, "--utility-threshold", "tasking.utility_threshold", "Tasks must score strictly above this");
    add_named(app, o, "--top-k", "actions.top_k", "Insights retrieved per task");
    add_named(app, o, "--condition", "actions.conditions", "insight_steered and/or context_steered");
    add_named(app, o, "--budget", "agent.budget", "Agent step budget per phase");
    add_named(app, o, "--sandbox", "agent.sandbox_root", "Agent sandbox root");

    auto* ingest = app.add_subcommand("ingest", "Filter, sessionize and store transcript records");
    std::string records_path, denylist_path;
    ingest->add_option("records", records_path, "JSON-lines transcript records")->required()->check(CLI::ExistingFile);
    ingest->add_option("--denylist", denylist_path, "Denylist file")->check(CLI::ExistingFile);

    auto* build = app.add_subcommand("build", "Build one lattice per session");
    auto* merge = app.add_subcommand("merge", "Merge session lattices into the final lattice");
    auto* tasks = app.add_subcommand("tasks", "Infer and gate tasks for the task day");
    auto* propose = app.add_subcommand("propose", "Propose two actions per retained task");

    auto* steer = app.add_subcommand("steer", "Add a note to a proposed action");
    std::string action_id, note;
    steer->add_option("action", action_id)->required();
    steer->add_option("note", note)->required();

    auto* approve = app.add_subcommand("approve", "Approve a proposed action");
    approve->add_option("action", action_id)->required();

    auto* run = app.add_subcommand("run", "Run the agent on an approved action");
    run->add_option("action", action_id)->required();

    auto* exp = app.add_subcommand("export", "Write final-layer insights with provenance");
    std::string out_path;
    exp->add_option("-o,--out", out_path, "Output file (default stdout)");

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    std::string host;
    int port = -1;
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    CLI11_PARSE(app, argc, argv);

    auto logger = spdlog::stderr_color_mt("latticework");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(o.log_level));

    try {
        lw::Engine engine(make_config(o));
        json result;
        if (*ingest) {
            auto s = engine.ingest(records_path, denylist_path.empty() ? std::nullopt
                                                                       : std::optional<std::filesystem::path>(denylist_path));
            result = {{"kept", s.kept}, {"dropped", s.dropped}, {"sessions", s.sessions}};
        } else if (*build) {
            result = {{"scopes", engine.build()}};
        } else if (*merge) {
            auto scope = engine.merge();
            result = {{"scope", scope}, {"final_insights", engine.final_insights().size()}};
        } else if (*tasks) {
            auto s = engine.tasks();
            result = {{"task_day", s.task_day}, {"retained", task_list(s.retained)}, {"rejected", task_list(s.rejected)}};
        } else if (*propose) {
            result = {{"actions", action_list(engine.propose())}};
        } else if (*steer) {
            result = lw::to_json(engine.steer(action_id, note));
        } else if (*approve) {
            result = lw::to_json(engine.approve(action_id));
        } else if (*run) {
            result = lw::to_json(engine.run_action(action_id));
        } else if (*exp) {
            auto doc = engine.export_insights();
            if (out_path.empty()) {
                std::cout << doc.dump(2) << "\n";
                return 0;
            }
            std::ofstream(out_path, std::ios::binary) << doc.dump(2) << "\n";
            result = {{"out", out_path}, {"insights", doc.at("insights").size()}};
        } else if (*serve) {
            lw::Service service(engine);
            const auto& sc = engine.config().server;
            if (!service.listen(host.empty() ? sc.host : host, port < 0 ? sc.port : port))
                throw lw::Error(lw::ErrorCode::IoError, "cannot bind the HTTP port");
            return 0;
        }
        std::cout << result.dump(2) << "\n";
        return 0;
    } catch (const lw::Error& e) {
        std::cerr << json{{"error", std::string(lw::to_string(e.code()))}, {"message", e.what()}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "InternalError"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }
}

#pragma once
// On-disk store. Layout under the root:
//   ingest/sessions.json          sessioned, filtered records
//   lattices/<scope>/<scope>.json one directory per session scope
//   build/sessions.json           session lattice scopes, in session order
//   merge/final.json              scope of the cross-session lattice
//   tasks/tasks.json              scored tasks for the task day
//   actions/<id>.json             proposed actions and their status
//   runs/<run-id>/trace.jsonl     append-only step trace
//   runs/<run-id>/run.json        run summary
//   ratings/ratings.jsonl
// Writes go through a temp file + rename; one writer per scope/action.

#include "latticework/actions.hpp"
#include "latticework/lattice.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lw {

class Store {
public:
    explicit Store(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    void write_text(const std::string& rel, const std::string& text) const;
    std::optional<std::string> read_text(const std::string& rel) const;
    void write_json(const std::string& rel, const nlohmann::json& doc) const;
    std::optional<nlohmann::json> read_json(const std::string& rel) const;
    void append_line(const std::string& rel, const std::string& line) const;
    void remove(const std::string& rel) const;
    bool exists(const std::string& rel) const;

    std::string save_lattice(const Lattice& lattice) const;  // returns scope hash
    std::optional<Lattice> load_lattice(const std::string& scope) const;
    std::vector<std::string> lattice_scopes() const;

    void save_action(const ProposedAction& action) const;
    std::optional<ProposedAction> load_action(const std::string& id) const;
    std::vector<ProposedAction> load_actions() const;
    // Read-modify-write under the action's lock. NotFound if absent.
    ProposedAction update_action(const std::string& id,
                                 const std::function<ProposedAction(ProposedAction)>& fn) const;

private:
    std::filesystem::path root_;
};

} // namespace lw

#include "latticework/store.hpp"

#include "latticework/error.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <unistd.h>

namespace lw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::mutex& lock_for(const fs::path& p) {
    static std::mutex table_mutex;
    static std::map<std::string, std::mutex> table;
    std::lock_guard lock(table_mutex);
    return table[p.lexically_normal().string()];
}

std::string dump(const json& doc) {
    return doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

} // namespace

Store::Store(fs::path root) : root_(std::move(root)) {}

void Store::write_text(const std::string& rel, const std::string& text) const {
    const fs::path target = root_ / rel;
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + target.parent_path().string() + ": " + ec.message());
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
    }
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot replace " + target.string() + ": " + ec.message());
}

std::optional<std::string> Store::read_text(const std::string& rel) const {
    std::ifstream in(root_ / rel, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void Store::write_json(const std::string& rel, const json& doc) const {
    write_text(rel, dump(doc));
}

std::optional<json> Store::read_json(const std::string& rel) const {
    auto text = read_text(rel);
    if (!text) return std::nullopt;
    try {
        return json::parse(*text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CorruptPayload, rel + ": " + e.what());
    }
}

void Store::append_line(const std::string& rel, const std::string& line) const {
    const fs::path target = root_ / rel;
    std::lock_guard lock(lock_for(target));
    fs::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorCode::IoError, "cannot append to " + target.string());
    out << line << '\n';
}

void Store::remove(const std::string& rel) const {
    std::error_code ec;
    fs::remove_all(root_ / rel, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot remove " + rel + ": " + ec.message());
}

bool Store::exists(const std::string& rel) const {
    return fs::exists(root_ / rel);
}

std::string Store::save_lattice(const Lattice& lattice) const {
    const std::string scope = scope_hash(lattice.session_scope());
    const std::string rel = "lattices/" + scope + "/" + scope + ".json";
    std::lock_guard lock(lock_for(root_ / rel));
    write_text(rel, save(lattice));
    return scope;
}

std::optional<Lattice> Store::load_lattice(const std::string& scope) const {
    auto text = read_text("lattices/" + scope + "/" + scope + ".json");
    if (!text) return std::nullopt;
    return load(*text);
}

std::vector<std::string> Store::lattice_scopes() const {
    std::vector<std::string> out;
    const fs::path dir = root_ / "lattices";
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory()) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

void Store::save_action(const ProposedAction& action) const {
    write_json("actions/" + action.id + ".json", to_json(action));
}

std::optional<ProposedAction> Store::load_action(const std::string& id) const {
    if (id.empty() || id.find('/') != std::string::npos || id.find("..") != std::string::npos) return std::nullopt;
    auto doc = read_json("actions/" + id + ".json");
    if (!doc) return std::nullopt;
    return action_from_json(*doc);
}

std::vector<ProposedAction> Store::load_actions() const {
    std::vector<ProposedAction> out;
    const fs::path dir = root_ / "actions";
    if (!fs::is_directory(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(*load_action(f.stem().string()));
    return out;
}

ProposedAction Store::update_action(const std::string& id,
                                    const std::function<ProposedAction(ProposedAction)>& fn) const {
    std::lock_guard lock(lock_for(root_ / "actions" / id));
    auto current = load_action(id);
    if (!current) throw Error(ErrorCode::NotFound, "no action " + id);
    ProposedAction next = fn(*current);
    save_action(next);
    return next;
}

} // namespace lw

#include "latticework/http_backend.hpp"

#include "latticework/error.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <regex>

namespace lw {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;     // scheme://host[:port]
    std::string base_path;  // without trailing slash
};

Endpoint split_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw Error(ErrorCode::ConfigError, "invalid endpoint url: " + url);
    std::string path = m[2].matched ? m[2].str() : "";
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {m[1].str(), path};
}

json post_json(const BackendConfig& config, const std::string& url, const std::string& route, const json& body) {
    Endpoint ep = split_url(url);
    httplib::Client client(ep.origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (const char* token = std::getenv(config.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    auto res = client.Post(ep.base_path + route, headers, body.dump(), "application/json");
    if (!res) {
        auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
            throw Error(ErrorCode::TimeoutExceeded, "request to " + url + route + " timed out (" + httplib::to_string(err) + ")");
        throw Error(ErrorCode::EndpointError, "request to " + url + route + " failed: " + httplib::to_string(err), 0);
    }
    if (res->status < 200 || res->status >= 300)
        throw Error(ErrorCode::EndpointError,
                    "endpoint " + url + route + " returned HTTP " + std::to_string(res->status), res->status);
    try {
        return json::parse(res->body);
    } catch (const json::exception&) {
        throw Error(ErrorCode::EndpointError, "endpoint " + url + route + " returned a non-JSON body", res->status);
    }
}

} // namespace

HttpBackend::HttpBackend(BackendConfig config) : ModelBackend(std::move(config)) {
    split_url(this->config().endpoint_url);
}

std::string HttpBackend::complete(const Request& request, const std::string& prompt) {
    json content = prompt;
    if (request.context.is_object() && request.context.contains("image_data_urls")) {
        content = json::array({{{"type", "text"}, {"text", prompt}}});
        for (const auto& url : request.context.at("image_data_urls"))
            content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    }
    json body = {{"model", config().model_for(request.role)},
                 {"temperature", config().temperature},
                 {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
    json reply = post_json(config(), config().endpoint_url, "/chat/completions", body);
    try {
        const json& message = reply.at("choices").at(0).at("message");
        const json& text = message.at("content");
        if (text.is_string()) return text.get<std::string>();
        // content-part arrays: concatenate the text parts
        std::string joined;
        for (const auto& part : text)
            if (part.value("type", "") == "text") joined += part.value("text", "");
        return joined;
    } catch (const json::exception&) {
        throw Error(ErrorCode::EndpointError, "chat completion reply lacks choices[0].message.content", 200);
    }
}

std::vector<double> HttpBackend::score(const std::string& query, const std::vector<std::string>& documents) {
    const std::string& url = config().rerank_url.empty() ? config().endpoint_url : config().rerank_url;
    json body = {{"model", config().model_for(ModelRole::Rerank)}, {"query", query}, {"documents", documents}};
    json reply = post_json(config(), url, "/rerank", body);
    std::vector<double> scores(documents.size(), 0.0);
    std::vector<bool> seen(documents.size(), false);
    try {
        const json& rows = reply.contains("data") ? reply.at("data") : reply.at("results");
        for (const auto& row : rows) {
            auto idx = row.at("index").get<std::size_t>();
            if (idx >= documents.size()) throw Error(ErrorCode::EndpointError, "rerank index out of range", 200);
            scores[idx] = row.contains("relevance_score") ? row.at("relevance_score").get<double>()
                                                          : row.at("score").get<double>();
            seen[idx] = true;
        }
    } catch (const json::exception&) {
        throw Error(ErrorCode::EndpointError, "rerank reply lacks index/score pairs", 200);
    }
    for (bool s : seen)
        if (!s) throw Error(ErrorCode::EndpointError, "rerank reply omitted a document", 200);
    return scores;
}

} // namespace lw

#pragma once

// JSON-over-HTTP clients for the external translator and QE scorer services.
//
//   translator: POST {source_text, source_lang, target_lang}
//               -> {translated_text, model?}
//   scorer:     POST {source_text, translated_text, target_lang} -> {score}
//
// Transport failures and 5xx answers are retried; when retries run out the
// call raises endpoint_error. Anything else wrong with an answer is the
// item's problem (translator) or a protocol_error (scorer).

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include <httplib.h>

#include "vbforge/corpus_model.hpp"
#include "vbforge/errors.hpp"
#include "vbforge/langalloc.hpp"
#include "vbforge/qe_filter.hpp"

namespace vbforge {

struct EndpointUrl {
    std::string origin; // scheme://host[:port]
    std::string path;   // starts with '/'
};

inline EndpointUrl parse_endpoint_url(std::string_view url) {
    auto scheme = url.find("://");
    if (scheme == std::string_view::npos || url.substr(0, scheme) != "http") {
        throw config_error("endpoint URL must start with http://, got '" + std::string(url) + "'");
    }
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string_view::npos) {
        return {std::string(url), "/"};
    }
    return {std::string(url.substr(0, slash)), std::string(url.substr(slash))};
}

struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds backoff{50};
    std::chrono::seconds timeout{30};
};

namespace detail {

struct HttpAnswer {
    int status = 0;
    std::string body;
};

// One POST with retries on transport errors and 5xx.
inline HttpAnswer post_json(const EndpointUrl & url, const std::string & body, const RetryPolicy & retry) {
    std::string last_error;
    for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(retry.backoff * attempt);
        }
        httplib::Client cli(url.origin);
        cli.set_connection_timeout(retry.timeout);
        cli.set_read_timeout(retry.timeout);
        auto res = cli.Post(url.path, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        return {res->status, res->body};
    }
    throw endpoint_error(url.origin + url.path + ": " + last_error);
}

} // namespace detail

class HttpTranslator : public TranslatorClient {
public:
    explicit HttpTranslator(std::string url, RetryPolicy retry = {})
        : raw_(std::move(url)), url_(parse_endpoint_url(raw_)), retry_(retry) {}

    TranslationReply translate(const TranslationRequest & req) override {
        json body = {{"source_text", req.source_text}, {"source_lang", req.source_lang},
                     {"target_lang", req.target_lang}};
        auto answer = detail::post_json(url_, body.dump(), retry_);
        if (answer.status != 200) {
            return {std::nullopt, "HTTP " + std::to_string(answer.status)};
        }
        json j = json::parse(answer.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            return {std::nullopt, "malformed response body"};
        }
        auto text = j.find("translated_text");
        if (text == j.end() || !text->is_string()) {
            return {std::nullopt, "response lacks translated_text"};
        }
        TranslationResult r;
        r.translated_text = text->get<std::string>();
        r.language = req.target_lang;
        if (auto m = j.find("model"); m != j.end() && m->is_string()) {
            r.model = m->get<std::string>();
        }
        if (auto lang = j.find("target_lang"); lang != j.end() && lang->is_string()) {
            r.language = lang->get<std::string>();
        }
        return {std::move(r), {}};
    }

    std::string describe() const override { return raw_; }

private:
    std::string raw_;
    EndpointUrl url_;
    RetryPolicy retry_;
};

class HttpScorer : public ScorerClient {
public:
    explicit HttpScorer(std::string url, RetryPolicy retry = {})
        : raw_(std::move(url)), url_(parse_endpoint_url(raw_)), retry_(retry) {}

    double score(const ScoreRequest & req) override {
        json body = {{"source_text", req.source_text}, {"translated_text", req.translated_text},
                     {"target_lang", req.target_lang}};
        auto answer = detail::post_json(url_, body.dump(), retry_);
        if (answer.status != 200) {
            throw protocol_error("scorer answered HTTP " + std::to_string(answer.status));
        }
        json j = json::parse(answer.body, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("score") || !j["score"].is_number()) {
            throw protocol_error("scorer response lacks a numeric score");
        }
        return j["score"].get<double>();
    }

    std::string describe() const override { return raw_; }

private:
    std::string raw_;
    EndpointUrl url_;
    RetryPolicy retry_;
};

} // namespace vbforge

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vbforge {

// Base of every fault the library raises. Data-level violations (validation
// reports, count mismatches, infeasible ratios) are returned as values instead.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class unsupported_language_error : public error {
public:
    explicit unsupported_language_error(const std::string & code)
        : error("unsupported language: '" + code + "'"), code_(code) {}
    const std::string & code() const { return code_; }
private:
    std::string code_;
};

class schema_error : public error {
public:
    schema_error(const std::string & what, std::size_t line = 0)
        : error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    // 1-based line in the source file, 0 when not file-backed
    std::size_t line() const { return line_; }
private:
    std::size_t line_;
};

class io_error : public error {
public:
    using error::error;
};

class duplicate_id_error : public error {
public:
    explicit duplicate_id_error(const std::string & id) : error("duplicate sample id: " + id) {}
};

class endpoint_error : public error {
public:
    using error::error;
};

class protocol_error : public error {
public:
    using error::error;
};

class missing_pool_error : public error {
public:
    explicit missing_pool_error(const std::string & code)
        : error("no prompt template pool for language '" + code + "'") {}
};

class config_error : public error {
public:
    using error::error;
};

class unregistered_block_error : public error {
public:
    explicit unregistered_block_error(const std::string & name)
        : error("block not registered: " + name) {}
};

class unknown_stage_error : public error {
public:
    explicit unknown_stage_error(int stage)
        : error("unknown training stage: " + std::to_string(stage)) {}
};

class empty_input_error : public error {
public:
    using error::error;
};

} // namespace vbforge

#pragma once

#include <stdexcept>
#include <string>

namespace chainblock {

// Base for every error the library throws. Per-item problems that must not
// abort a batch (a malformed filter line, one bad page) are reported as
// diagnostics instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UrlError : public Error {
public:
    using Error::Error;
};

class RuleSyntaxError : public Error {
public:
    using Error::Error;
};

// generate_rule() could not produce a rule (IP host, bare public suffix,
// data: URL). The caller skips the URL and records the message.
class RuleGenerationError : public Error {
public:
    using Error::Error;
};

// Malformed XML. `line` and `column` are 1-based positions in the input.
class GraphmlParseError : public Error {
public:
    GraphmlParseError(const std::string& what, long line, long column)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line), column_(column) {}
    long line() const { return line_; }
    long column() const { return column_; }

private:
    long line_;
    long column_;
};

// Well-formed XML that does not follow the graph schema (missing key
// declarations, missing required data, dangling edge endpoints).
class SchemaError : public Error {
public:
    using Error::Error;
};

// The graph parsed but violates a structural invariant, or a query found the
// graph corrupt (conflicting creators, insertion cycles).
class GraphInvariantError : public Error {
public:
    using Error::Error;
};

class ModelError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class CrawlError : public Error {
public:
    using Error::Error;
};

}  // namespace chainblock

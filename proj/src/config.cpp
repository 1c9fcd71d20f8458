#include "rpctunnel/config.hpp"

#include <fstream>
#include <sstream>

namespace rpctunnel {

namespace {

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& value, int line) {
    if (value == "true" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "no" || value == "0") return false;
    throw ConfigError("expected true/false, got '" + value + "'", line);
}

size_t parse_size(const std::string& value, int line) {
    try {
        size_t idx = 0;
        unsigned long long n = std::stoull(value, &idx);
        if (idx != value.size() || value.empty()) throw std::invalid_argument("");
        return static_cast<size_t>(n);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + value + "'", line);
    }
}

}  // namespace

const char* log_level_name(LogLevel level) {
    switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
    }
    return "info";
}

LogLevel parse_log_level(const std::string& name) {
    if (name == "error") return LogLevel::error;
    if (name == "info") return LogLevel::info;
    if (name == "debug") return LogLevel::debug;
    throw ConfigError("unknown log level '" + name + "'");
}

RuntimeConfig parse_config_text(const std::string& text, RuntimeConfig base) {
    RuntimeConfig config = std::move(base);
    std::istringstream in(text);
    std::string raw_line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw_line)) {
        line_no++;
        std::string line = trim(raw_line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("unterminated section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value", line_no);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("missing key before '='", line_no);

        try {
            if (section == "gateway") {
                if (key == "listen") config.listen = value;
                else if (key == "portmapper") config.portmapper = value;
                else if (key == "log-level") config.log_level = parse_log_level(value);
                else RT_LOG_INFO("config: ignoring unknown key '%s' (line %d)", key.c_str(), line_no);
            } else if (section == "tls") {
                if (key == "cert") config.tls.certificate_chain = value;
                else if (key == "key") config.tls.private_key = value;
                else if (key == "client-ca") config.tls.client_ca = value;
                else if (key == "require-client-cert")
                    config.tls.require_client_cert = parse_bool(value, line_no);
                else RT_LOG_INFO("config: ignoring unknown key '%s' (line %d)", key.c_str(), line_no);
            } else if (section == "policy") {
                if (key == "allow-prog")
                    config.policy.allowed_programs.push_back(ProgramAllow::parse(value));
                else if (key == "allow-client")
                    config.policy.allowed_client_networks.push_back(CidrPrefix::parse(value));
                else if (key == "backend") config.policy.backend_host = value;
                else if (key == "max-record-bytes")
                    config.policy.max_record_bytes = parse_size(value, line_no);
                else RT_LOG_INFO("config: ignoring unknown key '%s' (line %d)", key.c_str(), line_no);
            } else {
                RT_LOG_INFO("config: ignoring key '%s' in unknown section '%s' (line %d)",
                            key.c_str(), section.c_str(), line_no);
            }
        } catch (const ConfigError& e) {
            if (e.line() > 0) throw;
            throw ConfigError(e.what(), line_no);
        }
    }
    return config;
}

RuntimeConfig load_config(const std::string& path, RuntimeConfig base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), std::move(base));
}

std::string format_config(const RuntimeConfig& config) {
    std::ostringstream out;
    out << "[gateway]\n";
    if (!config.listen.empty()) out << "listen = " << config.listen << "\n";
    if (!config.portmapper.empty()) out << "portmapper = " << config.portmapper << "\n";
    out << "log-level = " << log_level_name(config.log_level) << "\n";
    out << "\n[tls]\n";
    if (!config.tls.certificate_chain.empty())
        out << "cert = " << config.tls.certificate_chain << "\n";
    if (!config.tls.private_key.empty()) out << "key = " << config.tls.private_key << "\n";
    if (!config.tls.client_ca.empty()) out << "client-ca = " << config.tls.client_ca << "\n";
    out << "require-client-cert = " << (config.tls.require_client_cert ? "true" : "false")
        << "\n";
    out << "\n[policy]\n";
    for (const ProgramAllow& allow : config.policy.allowed_programs)
        out << "allow-prog = " << allow.str() << "\n";
    for (const CidrPrefix& prefix : config.policy.allowed_client_networks)
        out << "allow-client = " << prefix.text << "\n";
    out << "backend = " << config.policy.backend_host << "\n";
    out << "max-record-bytes = " << config.policy.max_record_bytes << "\n";
    return out.str();
}

}  // namespace rpctunnel

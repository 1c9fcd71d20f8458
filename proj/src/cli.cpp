#include "rpctunnel/cli.hpp"

namespace rpctunnel {

namespace {

unsigned long parse_ulong(const std::string& text, const char* synopsis) {
    try {
        size_t idx = 0;
        unsigned long value = std::stoul(text, &idx);
        if (idx != text.size() || text.empty()) throw std::invalid_argument("");
        return value;
    } catch (const std::exception&) {
        throw UsageError(std::string("bad number '") + text + "'\n" + synopsis);
    }
}

}  // namespace

uint16_t parse_listen_port(const std::string& text) {
    unsigned long port = parse_ulong(text, "");
    if (port == 0 || port > 65535)
        throw UsageError("port '" + text + "' out of range 1-65535");
    return static_cast<uint16_t>(port);
}

uint32_t parse_u32_arg(const std::string& text) {
    unsigned long value = parse_ulong(text, "");
    if (value > 0xffffffffUL)
        throw UsageError("value '" + text + "' does not fit in 32 bits");
    return static_cast<uint32_t>(value);
}

TcpFilterArgs parse_tcpfilter_args(const std::vector<std::string>& args) {
    TcpFilterArgs parsed;
    std::vector<std::string> positional;
    for (size_t i = 0; i < args.size(); i++) {
        if (args[i] == "--log-level" && i + 1 < args.size()) {
            try {
                parsed.log_level = parse_log_level(args[++i]);
            } catch (const ConfigError& e) {
                throw UsageError(std::string(e.what()) + "\n" + kTcpFilterSynopsis);
            }
        } else if (!args[i].empty() && args[i][0] == '-') {
            throw UsageError("unknown flag '" + args[i] + "'\n" + kTcpFilterSynopsis);
        } else {
            positional.push_back(args[i]);
        }
    }
    if (positional.size() != 3) throw UsageError(kTcpFilterSynopsis);
    try {
        parsed.source_port = parse_listen_port(positional[0]);
        parsed.destination_port = parse_listen_port(positional[2]);
    } catch (const UsageError& e) {
        throw UsageError(std::string(e.what()) + "\n" + kTcpFilterSynopsis);
    }
    parsed.destination_host = positional[1];
    return parsed;
}

RpcFilterArgs parse_rpcfilter_args(const std::vector<std::string>& args) {
    RpcFilterArgs parsed;
    TunnelEndpointConfig& config = parsed.config;
    std::vector<std::string> positional;
    for (size_t i = 0; i < args.size(); i++) {
        const std::string& arg = args[i];
        auto next = [&]() -> const std::string& {
            if (i + 1 >= args.size())
                throw UsageError("flag '" + arg + "' needs a value\n" + kRpcFilterSynopsis);
            return args[++i];
        };
        if (arg == "--gateway") {
            config.gateway_url = next();
        } else if (arg == "--portmapper") {
            try {
                config.portmapper = HostPort::parse(next());
            } catch (const ConfigError& e) {
                throw UsageError(std::string(e.what()) + "\n" + kRpcFilterSynopsis);
            }
        } else if (arg == "--listen-port") {
            const std::string& text = next();
            unsigned long port = 0;
            try {
                size_t idx = 0;
                port = std::stoul(text, &idx);
                if (idx != text.size() || port > 65535) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw UsageError("bad --listen-port '" + text + "'\n" + kRpcFilterSynopsis);
            }
            config.listen_port = static_cast<uint16_t>(port);  // 0 = ephemeral
        } else if (arg == "--ca-file") {
            config.ca_file = next();
        } else if (arg == "--insecure") {
            config.insecure_skip_verify = true;
        } else if (arg == "--log-level") {
            try {
                parsed.log_level = parse_log_level(next());
            } catch (const ConfigError& e) {
                throw UsageError(std::string(e.what()) + "\n" + kRpcFilterSynopsis);
            }
        } else if (!arg.empty() && arg[0] == '-') {
            throw UsageError("unknown flag '" + arg + "'\n" + kRpcFilterSynopsis);
        } else {
            positional.push_back(arg);
        }
    }
    if (positional.size() < 3) throw UsageError(kRpcFilterSynopsis);
    config.server_address = positional[0];
    try {
        config.prog = parse_u32_arg(positional[1]);
        for (size_t i = 2; i < positional.size(); i++)
            config.versions.push_back(parse_u32_arg(positional[i]));
    } catch (const UsageError& e) {
        throw UsageError(std::string(e.what()) + "\n" + kRpcFilterSynopsis);
    }
    if (config.portmapper.host.empty()) config.portmapper = {"127.0.0.1", 111};
    return parsed;
}

}  // namespace rpctunnel

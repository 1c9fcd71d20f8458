#include <csignal>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <thread>

#include "rpctunnel/cli.hpp"
#include "rpctunnel/config.hpp"
#include "rpctunnel/demo_rpc.hpp"
#include "rpctunnel/gateway.hpp"
#include "rpctunnel/portmap.hpp"
#include "rpctunnel/tcpfilter.hpp"
#include "rpctunnel/tunnel_client.hpp"

using namespace rpctunnel;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

void install_signal_handlers() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::signal(SIGPIPE, SIG_IGN);
}

void wait_for_stop() {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    RT_LOG_INFO("shutting down");
}

int usage(const std::string& message) {
    std::cerr << message << "\n";
    return 1;
}

const char* kTopSynopsis =
    "usage: rpctunnel <command> [args]\n"
    "commands:\n"
    "  tcpfilter <source port> <destination machine> <destination port>\n"
    "  rpcfilter <server machine address> <program number> <version numbers>\n"
    "  gateway serve|cgi [flags]\n"
    "  portmap [--listen <host>] [--port <port>]\n"
    "  demo-server [--host <host>] [--port <port>] --portmapper <host:port>\n"
    "  demo-client --proc <null|echo|add> [args] --portmapper <host:port> [--server <host>]\n";

int cmd_tcpfilter(const std::vector<std::string>& args) {
    TcpFilterArgs parsed = parse_tcpfilter_args(args);
    set_log_level(parsed.log_level);
    TcpFilter filter;
    filter.start(parsed.source_port, parsed.destination_host, parsed.destination_port);
    wait_for_stop();
    filter.stop();
    return 0;
}

int cmd_rpcfilter(const std::vector<std::string>& args) {
    RpcFilterArgs parsed = parse_rpcfilter_args(args);
    set_log_level(parsed.log_level);
    if (parsed.config.gateway_url.empty())
        throw UsageError(std::string("--gateway <url> is required\n") + kRpcFilterSynopsis);
    RpcFilter filter;
    filter.start(parsed.config);
    wait_for_stop();
    filter.stop();
    return 0;
}

const char* kGatewaySynopsis =
    "usage: gateway serve --listen <addr:port> [--tls-cert <path> --tls-key <path>]\n"
    "               --portmapper <host:port> --allow-prog <num>[:<vers,...>]\n"
    "               [--allow-client <cidr>] [--require-client-cert] [--client-ca <path>]\n"
    "               [--max-record-bytes <n>] [--backend <host>] [--config <path>]\n"
    "               [--print-config] [--log-level <level>]\n"
    "       gateway cgi --portmapper <host:port> --allow-prog <num>[:<vers,...>] ...";

struct GatewayCli {
    RuntimeConfig config;
    bool print_config = false;
};

GatewayCli parse_gateway_flags(const std::vector<std::string>& args) {
    GatewayCli cli;
    // Config file first (flag wins over RPCTUNNEL_CONFIG), flags override it.
    std::string config_path;
    if (const char* env = std::getenv("RPCTUNNEL_CONFIG")) config_path = env;
    for (size_t i = 0; i < args.size(); i++)
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (!config_path.empty()) cli.config = load_config(config_path);

    RuntimeConfig& config = cli.config;
    bool policy_from_flags = false;
    for (size_t i = 0; i < args.size(); i++) {
        const std::string& arg = args[i];
        auto next = [&]() -> const std::string& {
            if (i + 1 >= args.size())
                throw UsageError("flag '" + arg + "' needs a value\n" + kGatewaySynopsis);
            return args[++i];
        };
        auto flag_policy = [&]() -> GatewayPolicy& {
            // The first policy flag replaces the file's policy lists wholesale.
            if (!policy_from_flags) {
                config.policy.allowed_programs.clear();
                config.policy.allowed_client_networks.clear();
                policy_from_flags = true;
            }
            return config.policy;
        };
        if (arg == "--config") {
            next();  // handled in the first pass
        } else if (arg == "--listen") {
            config.listen = next();
        } else if (arg == "--portmapper") {
            config.portmapper = next();
        } else if (arg == "--tls-cert") {
            config.tls.certificate_chain = next();
        } else if (arg == "--tls-key") {
            config.tls.private_key = next();
        } else if (arg == "--client-ca") {
            config.tls.client_ca = next();
        } else if (arg == "--require-client-cert") {
            config.tls.require_client_cert = true;
        } else if (arg == "--allow-prog") {
            flag_policy().allowed_programs.push_back(ProgramAllow::parse(next()));
        } else if (arg == "--allow-client") {
            flag_policy().allowed_client_networks.push_back(CidrPrefix::parse(next()));
        } else if (arg == "--backend") {
            config.policy.backend_host = next();
        } else if (arg == "--max-record-bytes") {
            config.policy.max_record_bytes = static_cast<size_t>(parse_u32_arg(next()));
        } else if (arg == "--log-level") {
            config.log_level = parse_log_level(next());
        } else if (arg == "--print-config") {
            cli.print_config = true;
        } else {
            throw UsageError("unknown flag '" + arg + "'\n" + kGatewaySynopsis);
        }
    }
    return cli;
}

int cmd_gateway(const std::vector<std::string>& args) {
    if (args.empty()) return usage(kGatewaySynopsis);
    std::string mode = args[0];
    std::vector<std::string> rest(args.begin() + 1, args.end());
    GatewayCli cli = parse_gateway_flags(rest);
    set_log_level(cli.config.log_level);
    if (cli.print_config) {
        std::cout << format_config(cli.config);
        return 0;
    }
    if (cli.config.portmapper.empty())
        throw UsageError(std::string("--portmapper is required\n") + kGatewaySynopsis);
    HostPort portmapper = HostPort::parse(cli.config.portmapper);

    if (mode == "cgi") {
        const char* remote = std::getenv("REMOTE_ADDR");
        return run_cgi(std::cin, std::cout, cli.config.policy, portmapper,
                       remote ? remote : "");
    }
    if (mode != "serve") return usage(kGatewaySynopsis);

    if (cli.config.listen.empty())
        throw UsageError(std::string("--listen is required\n") + kGatewaySynopsis);
    HostPort listen = HostPort::parse(cli.config.listen);
    std::optional<TlsServerConfig> tls;
    if (cli.config.tls.enabled()) tls = cli.config.tls;

    GatewayServer server;
    server.start(listen.host, listen.port, tls, cli.config.policy, portmapper);
    wait_for_stop();
    server.stop();
    return 0;
}

int cmd_portmap(const std::vector<std::string>& args) {
    std::string host = "0.0.0.0";
    uint16_t port = 111;
    for (size_t i = 0; i < args.size(); i++) {
        if (args[i] == "--listen" && i + 1 < args.size()) host = args[++i];
        else if (args[i] == "--port" && i + 1 < args.size()) port = parse_listen_port(args[++i]);
        else if (args[i] == "--log-level" && i + 1 < args.size()) set_log_level(parse_log_level(args[++i]));
        else return usage("usage: portmap [--listen <host>] [--port <port>]");
    }
    PortmapServer server;
    server.start(host, port);
    wait_for_stop();
    server.stop();
    return 0;
}

int cmd_demo_server(const std::vector<std::string>& args) {
    std::string host = "127.0.0.1";
    uint16_t port = 0;
    std::string portmapper;
    for (size_t i = 0; i < args.size(); i++) {
        if (args[i] == "--host" && i + 1 < args.size()) host = args[++i];
        else if (args[i] == "--port" && i + 1 < args.size()) port = parse_listen_port(args[++i]);
        else if (args[i] == "--portmapper" && i + 1 < args.size()) portmapper = args[++i];
        else if (args[i] == "--log-level" && i + 1 < args.size()) set_log_level(parse_log_level(args[++i]));
        else return usage("usage: demo-server [--host <host>] [--port <port>] --portmapper <host:port>");
    }
    if (portmapper.empty())
        return usage("demo-server: --portmapper <host:port> is required");
    DemoServer server;
    server.start(HostPort::parse(portmapper), host, port);
    wait_for_stop();
    server.stop();
    return 0;
}

int cmd_demo_client(const std::vector<std::string>& args) {
    std::string proc;
    std::string server_host;
    std::string portmapper;
    std::vector<std::string> positional;
    for (size_t i = 0; i < args.size(); i++) {
        if (args[i] == "--proc" && i + 1 < args.size()) proc = args[++i];
        else if (args[i] == "--server" && i + 1 < args.size()) server_host = args[++i];
        else if (args[i] == "--portmapper" && i + 1 < args.size()) portmapper = args[++i];
        else if (args[i] == "--log-level" && i + 1 < args.size()) set_log_level(parse_log_level(args[++i]));
        else if (!args[i].empty() && args[i][0] == '-')
            return usage("demo-client: unknown flag " + args[i]);
        else positional.push_back(args[i]);
    }
    if (proc.empty() || portmapper.empty())
        return usage(
            "usage: demo-client --proc <null|echo|add> [args] --portmapper <host:port> "
            "[--server <host>]");
    HostPort pm = HostPort::parse(portmapper);
    if (server_host.empty()) server_host = pm.host;

    uint32_t port = pmap_getport(pm, demo::kProgram, demo::kVersion, pmap::kProtoTcp);
    if (port == 0) {
        std::cerr << "demo-client: program " << demo::kProgram << " not registered\n";
        return 2;
    }
    HostPort target{server_host, static_cast<uint16_t>(port)};

    if (proc == "null") {
        demo_null(target);
        return 0;
    }
    if (proc == "echo") {
        if (positional.size() != 1) return usage("demo-client: echo needs one payload argument");
        std::vector<uint8_t> payload(positional[0].begin(), positional[0].end());
        auto result = demo_echo(target, payload);
        std::cout.write(reinterpret_cast<const char*>(result.data()),
                        static_cast<std::streamsize>(result.size()));
        std::cout << "\n";
        return 0;
    }
    if (proc == "add") {
        if (positional.size() != 2) return usage("demo-client: add needs two numbers");
        uint32_t sum = demo_add(target, parse_u32_arg(positional[0]), parse_u32_arg(positional[1]));
        std::cout << sum << "\n";
        return 0;
    }
    return usage("demo-client: unknown proc '" + proc + "'");
}

}  // namespace

int main(int argc, char** argv) {
    install_signal_handlers();

    std::vector<std::string> args(argv + 1, argv + argc);

    // The paper-named binaries dispatch straight to their command.
    std::string invoked = argv[0];
    size_t slash = invoked.rfind('/');
    if (slash != std::string::npos) invoked = invoked.substr(slash + 1);

    std::string command;
    if (invoked == "tcpfilter" || invoked == "rpcfilter") {
        command = invoked;
    } else {
        if (args.empty()) return usage(kTopSynopsis);
        command = args[0];
        args.erase(args.begin());
    }

    try {
        if (command == "tcpfilter") return cmd_tcpfilter(args);
        if (command == "rpcfilter") return cmd_rpcfilter(args);
        if (command == "gateway") return cmd_gateway(args);
        if (command == "portmap") return cmd_portmap(args);
        if (command == "demo-server") return cmd_demo_server(args);
        if (command == "demo-client") return cmd_demo_client(args);
        return usage(kTopSynopsis);
    } catch (const UsageError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return 2;
    }
}

/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

// qdaqp command-line tool. Every flag overrides the matching key of the
// optional --config file.

#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "qdaqp.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Short spellings for the most common keys.
const std::vector<std::pair<std::string, std::string>> kAliases = {
    {"columns", "data.columns"}, {"rows", "data.rows"},       {"data", "data.path"},
    {"workload", "workload.path"}, {"count", "workload.count"}, {"predicates", "workload.predicates"},
    {"agg", "workload.agg"},     {"model", "model.kind"},     {"h-multiplier", "cdm.h_multiplier"},
    {"lambda", "adm.lambda"},    {"c", "adm.c"},              {"n", "federation.n"},
    {"k-spaces", "federation.k_spaces"}, {"rounds", "federation.rounds"}, {"workers", "federation.workers"},
};

struct Invocation {
    std::string config_path;
    std::map<std::string, std::string> overrides;
    std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, Invocation& inv) {
    cmd->add_option("--config", inv.config_path, "flat key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", inv.sets, "override any key: --set key=value (repeatable)");
    for (size_t i = 0; i < qdaqp_config_key_count(); ++i) {
        const std::string key = qdaqp_config_key(i);
        cmd->add_option_function<std::string>(
            "--" + key, [&inv, key](const std::string& v) { inv.overrides[key] = v; }, "config key " + key);
    }
    for (const auto& [alias, key] : kAliases) {
        cmd->add_option_function<std::string>(
            "--" + alias, [&inv, key](const std::string& v) { inv.overrides[key] = v; }, "alias of --" + key);
    }
}

int fail_with(qdaqp_status s) {
    std::fprintf(stderr, "error (%s): %s\n", qdaqp_status_name(s), qdaqp_last_error());
    return s == QDAQP_ERR_CONFIG ? kExitConfig : kExitRuntime;
}

int run(const Invocation& inv, qdaqp_status (*command)(const qdaqp_config*)) {
    qdaqp_config* cfg = nullptr;
    qdaqp_status s = inv.config_path.empty() ? qdaqp_config_new(&cfg) : qdaqp_config_load(inv.config_path.c_str(), &cfg);
    if (s != QDAQP_OK) return fail_with(s);

    auto apply = [&](const std::string& key, const std::string& value) {
        const qdaqp_status st = qdaqp_config_set(cfg, key.c_str(), value.c_str());
        return st;
    };
    for (const auto& [k, v] : inv.overrides) {
        if ((s = apply(k, v)) != QDAQP_OK) break;
    }
    if (s == QDAQP_OK) {
        for (const auto& kv : inv.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "error (config): --set expects key=value, got '%s'\n", kv.c_str());
                qdaqp_config_free(cfg);
                return kExitConfig;
            }
            if ((s = apply(kv.substr(0, eq), kv.substr(eq + 1))) != QDAQP_OK) break;
        }
    }
    if (s == QDAQP_OK) s = qdaqp_config_validate(cfg);
    if (s == QDAQP_OK) s = command(cfg);

    int code = kExitOk;
    if (s != QDAQP_OK) {
        code = fail_with(s);
    } else {
        char out[4096];
        size_t needed = 0;
        if (qdaqp_config_get(cfg, "out", out, sizeof(out), &needed) == QDAQP_OK && needed <= sizeof(out)) {
            std::printf("wrote results to %s\n", out);
        }
    }
    qdaqp_config_free(cfg);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qdaqp: adaptive query-driven aggregate estimation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(qdaqp_version()));

    struct Command {
        const char* name;
        const char* help;
        qdaqp_status (*fn)(const qdaqp_config*);
    };
    const Command commands[] = {
        {"gen-data", "generate a dataset CSV (data.csv)", qdaqp_cmd_gen_data},
        {"gen-workload", "generate a labeled query workload (workload.jsonl)", qdaqp_cmd_gen_workload},
        {"bootstrap", "train a device and write device.json and bootstrap.json", qdaqp_cmd_bootstrap},
        {"run-drift", "drift experiment with adaptation and its ablation", qdaqp_cmd_run_drift},
        {"run-federation", "multi-device federation, execution rate and convergence curve", qdaqp_cmd_run_federation},
    };

    std::vector<Invocation> invocations(std::size(commands));
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < std::size(commands); ++i) {
        CLI::App* sub = app.add_subcommand(commands[i].name, commands[i].help);
        add_config_flags(sub, invocations[i]);
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (subs[i]->parsed()) return run(invocations[i], commands[i].fn);
    }
    return kExitConfig;
}

#include "cli.hpp"

#include "commands.hpp"

#include "endonoise/error.hpp"
#include "endonoise/frame_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <ostream>

namespace endonoise::cli {

namespace {

std::vector<std::string> json_inputs(const nlohmann::json& value)
{
    std::vector<std::string> inputs;
    auto one = [](const nlohmann::json& v) {
        if (v.is_string())
            return v.get<std::string>();
        if (v.is_boolean())
            return std::string(v.get<bool>() ? "true" : "false");
        if (v.is_number())
            return v.dump();
        fail(ErrorKind::Argument, "config values must be strings, numbers, booleans or arrays of those");
    };
    if (value.is_array())
        for (const auto& v : value)
            inputs.push_back(one(v));
    else
        inputs.push_back(one(value));
    return inputs;
}

// Values from --config fill only the options the command line left unset.
void apply_config(CLI::App& sub, const nlohmann::json& doc)
{
    if (!doc.is_object())
        fail(ErrorKind::Argument, "--config must hold a JSON object");
    auto apply = [&sub](const std::string& key, const nlohmann::json& value, bool strict) {
        CLI::Option* opt = nullptr;
        try {
            opt = sub.get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            if (strict)
                fail(ErrorKind::Argument, "config key '" + key + "' is not an option of " + sub.get_name());
            return;
        }
        if (opt->count() > 0)
            return;
        for (const std::string& v : json_inputs(value))
            opt->add_result(v);
        opt->run_callback();
    };
    const std::string section = sub.get_name();
    for (const auto& [key, value] : doc.items())
        if (!value.is_object())
            apply(key, value, false);
    if (doc.contains(section)) {
        if (!doc[section].is_object())
            fail(ErrorKind::Argument, "config section '" + section + "' must be an object");
        for (const auto& [key, value] : doc[section].items())
            apply(key, value, true);
    }
}

std::string error_line(std::string_view kind, const std::string& message)
{
    std::string flat = message;
    for (char& c : flat)
        if (c == '\n')
            c = ' ';
    return "error: " + std::string(kind) + ": " + flat + "\n";
}

} // namespace

std::vector<std::string> subcommand_names()
{
    std::vector<std::string> names;
    for (const auto& c : make_commands())
        names.emplace_back(c->name());
    return names;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Raw-domain noise modelling, calibration and denoising for endoscope sensors", "endonoise"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Print help for every subcommand");
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with option values; command-line flags win")
        ->check(CLI::ExistingFile);

    auto commands = make_commands();
    std::vector<CLI::App*> subs;
    for (auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c->name(), c->summary());
        c->add_options(*sub);
        subs.push_back(sub);
    }

    std::vector<std::string> argv(args.rbegin(), args.rend());
    if (!argv.empty())
        argv.pop_back(); // program name
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << error_line("argument", e.what());
        return kExitUsage;
    }

    try {
        for (std::size_t i = 0; i < commands.size(); ++i) {
            if (!subs[i]->parsed())
                continue;
            if (!config_path.empty())
                apply_config(*subs[i], io::read_json(config_path));
            for (const std::string& name : commands[i]->required())
                if (subs[i]->get_option("--" + name)->count() == 0)
                    fail(ErrorKind::Argument, std::string(commands[i]->name()) + " needs --" + name);
            Context ctx{out, err};
            commands[i]->execute(ctx);
            return kExitOk;
        }
    } catch (const Error& e) {
        err << error_line(to_string(e.kind()), e.what());
        return e.kind() == ErrorKind::Argument ? kExitUsage : kExitFailure;
    } catch (const CLI::ParseError& e) {
        err << error_line("argument", e.what());
        return kExitUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << error_line("io", e.what());
        return kExitFailure;
    } catch (const std::exception& e) {
        err << error_line("internal", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace endonoise::cli

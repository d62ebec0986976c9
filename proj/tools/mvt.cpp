#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cli_common.hpp"
#include "mvt/errors.hpp"
#include "mvt/kernels.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Encoder-decoder transformer toolkit: positional-encoding analysis, "
                 "training, translation, and evaluation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a config file (command line wins)");
    app.get_config_ptr()->configurable(false);

    std::string kernels = "auto";
    app.add_option("--kernels", kernels, "Kernel variant: auto, scalar, avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}))
        ->capture_default_str();

    mvt::cli::add_cmd_analyze_pe(app);
    mvt::cli::add_cmd_search_step(app);
    mvt::cli::add_cmd_train(app);
    mvt::cli::add_cmd_translate(app);
    mvt::cli::add_cmd_evaluate(app);
    mvt::cli::add_cmd_compare(app);
    mvt::cli::add_cmd_experiment_triple(app);

    // Kernel selection must run before any subcommand callback.
    app.immediate_callback();
    app.callback([&kernels] { mvt::kern::select(kernels); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const mvt::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const mvt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mvt::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

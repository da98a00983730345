#include <iostream>

#include "CLI11.hpp"
#include "repulsor/scene.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"repulsor: tangent-point energy flows on triangle meshes"};
    app.require_subcommand(1);

    std::string runConfig, consistencyConfig, validateConfig;
    CLI::App* run = app.add_subcommand("run", "run a constrained flow from a scene config");
    run->add_option("config", runConfig, "scene config file")->required();
    CLI::App* consistency =
        app.add_subcommand("consistency", "energy consistency study on an analytic surface");
    consistency->add_option("config", consistencyConfig, "study config file")->required();
    CLI::App* validate = app.add_subcommand("validate", "parse and validate a scene config");
    validate->add_option("config", validateConfig, "scene config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return repulsor::runScene(repulsor::loadSceneConfig(runConfig), std::cout);
        }
        if (consistency->parsed()) {
            return repulsor::runConsistency(repulsor::loadSceneConfig(consistencyConfig),
                                            std::cout);
        }
        repulsor::SceneConfig cfg = repulsor::loadSceneConfig(validateConfig);
        repulsor::validateSceneConfig(cfg);
        repulsor::buildScene(cfg);
        std::cout << "OK\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

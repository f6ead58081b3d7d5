#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "lpma/csv.hpp"
#include "lpma/rng.hpp"
#include "lpma/simulation.hpp"

// Writes the bundled demo panel and a matching GDP-forecast record file.
int main(int argc, char** argv) {
    CLI::App app{"Generate the synthetic demo dataset"};
    std::string out = "data";
    std::uint64_t seed = 20240601;
    app.add_option("--out", out, "Output directory")->capture_default_str();
    app.add_option("--seed", seed, "Seed")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    std::filesystem::create_directories(out);
    const lpma::PanelDataset panel = lpma::demo_panel(seed);
    std::ofstream p(std::filesystem::path(out) / "demo_panel.csv", std::ios::binary);
    lpma::write_panel(p, panel);

    std::ofstream f(std::filesystem::path(out) / "demo_forecasts.csv", std::ios::binary);
    lpma::csv::Writer w(f);
    w.row({"country", "edition", "target_year", "value"});
    const int y0 = panel.first_period().year - 1;
    const int y1 = panel.period(panel.n_periods() - 1).year;
    for (int c = 0; c < panel.n_countries(); ++c) {
        lpma::Rng rng(lpma::derive_seed(seed, static_cast<std::uint64_t>(c) + 1, 9));
        std::normal_distribution<double> z(0.0, 0.8);
        for (int y = y0; y <= y1; ++y) {
            const double dec = std::round((2.0 + z(rng)) * 10.0) / 10.0;
            const double jun = std::round((2.0 + z(rng)) * 10.0) / 10.0;
            const auto& name = panel.countries()[static_cast<std::size_t>(c)];
            w.row({name, std::to_string(y) + "-12", std::to_string(y + 1), lpma::csv::format_number(dec)});
            if (y >= y0 + 1) w.row({name, std::to_string(y) + "-06", std::to_string(y + 1), lpma::csv::format_number(jun)});
        }
    }
    std::cout << "wrote " << out << "/demo_panel.csv and " << out << "/demo_forecasts.csv\n";
    return 0;
}

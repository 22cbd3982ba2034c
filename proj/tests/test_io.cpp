#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ionkink/io.hpp"

using namespace ionkink;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("ionkink_test_" + name)).string();
}

SweepRecord record(double alpha, double amp, std::optional<double> h) {
    SweepRecord r;
    r.alpha = alpha;
    r.amplitude = amp;
    r.delta_E_harmonic = h;
    r.phase.phase = Phase::Pinned;
    return r;
}

}  // namespace

TEST_CASE("config files") {
    std::istringstream in("# trap\nn_ions = 12\n\nion_mass_amu=40 # calcium\n omega_z_hz = 1e6\nalpha = 7.5\n"
                          "seed = 17\nbranch = minus\n");
    const RunConfig c = parse_config(in);
    CHECK(c.n_ions == 12);
    CHECK(c.ion_mass_amu == 40.0);
    CHECK(c.omega_z_hz == 1e6);
    CHECK(c.alpha == 7.5);
    CHECK(c.seed == 17u);
    CHECK(c.branch == Branch::Minus);
    CHECK(c.trap().n_ions() == 12);
    CHECK(c.trap(6.0).alpha() == 6.0);

    std::istringstream blank("");
    const RunConfig d = parse_config(blank);
    CHECK(d.n_ions == 30);
    CHECK(d.ion_mass_amu == 172.0);
    CHECK(d.omega_z_hz == 25000.0);
}

TEST_CASE("config errors name the offending token") {
    auto fails_with = [](const std::string& text, const std::string& token) {
        std::istringstream in(text);
        try {
            parse_config(in, "x.cfg");
        } catch (const UsageError& e) {
            return std::string(e.what()).find(token) != std::string::npos;
        }
        return false;
    };
    CHECK(fails_with("n_ions = 30\ntemperature = 4\n", "temperature"));
    CHECK(fails_with("n_ions 30\n", "n_ions 30"));
    CHECK(fails_with("alpha = fast\n", "fast"));
    CHECK(fails_with("n_ions = 2.5\n", "2.5"));
    CHECK(fails_with("branch = up\n", "up"));
    CHECK_THROWS_AS(load_config(temp_path("missing.cfg")), UsageError);
}

TEST_CASE("ranges include the stop value within half a step") {
    const auto g = parse_range("5.5:9.1:0.02");
    CHECK(g.size() == 181);
    CHECK(g.front() == 5.5);
    CHECK(g.back() == 9.1);
    CHECK(g[3] == 5.56);
    CHECK(parse_range("6.96:7.05:0.0225").size() == 5);
    CHECK(parse_range("1:2:0.3") == std::vector<double>{1.0, 1.3, 1.6, 1.9});
    CHECK(parse_range("1:2.16:0.3").back() == doctest::Approx(2.2));
    CHECK(parse_range("7.01") == std::vector<double>{7.01});
    CHECK(parse_range("3:1:-1") == std::vector<double>{3.0, 2.0, 1.0});
    CHECK_THROWS_AS(parse_range("1:2"), UsageError);
    CHECK_THROWS_AS(parse_range("1:2:0"), UsageError);
    CHECK_THROWS_AS(parse_range("1:2:-0.1"), UsageError);
    CHECK_THROWS_AS(parse_range("a:b:c"), UsageError);
}

TEST_CASE("doubles round trip through text") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int k = 0; k < 1000; ++k) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(u(rng)));
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("state files round trip exactly") {
    const TrapConfig cfg = TrapConfig::from_lab_units(30, 172.0, 25000.0, 6.8);
    CrystalState s = prepare_kink(cfg);
    s.phase = Phase::Pinned;
    RunConfig run;
    run.alpha = 6.8;
    std::stringstream buf;
    write_state_csv(buf, s, run, {"note=1"});
    const CrystalState back = read_state_csv(buf);
    CHECK(back.positions == s.positions);
    CHECK(back.phase == Phase::Pinned);
    CHECK_FALSE(back.velocities.has_value());

    s.velocities = Eigen::VectorXd::LinSpaced(60, -1.0, 1.0);
    std::stringstream buf2;
    write_state_csv(buf2, s, run);
    CHECK(*read_state_csv(buf2).velocities == *s.velocities);

    std::istringstream bad("index,x,z\n0,1,2\n2,3,4\n");
    CHECK_THROWS_AS(read_state_csv(bad), UsageError);
    std::istringstream empty("index,x,z\n");
    CHECK_THROWS_AS(read_state_csv(empty), UsageError);
}

TEST_CASE("sweep records") {
    CHECK(sweep_header_line() == "alpha,amplitude_um,phase,delta_E_harmonic,delta_E_md,resonance_hits,status\n");
    SweepRecord r = record(7.01, 1.5e-6, 0.8123456);
    r.resonance_hits = 2;
    CHECK(format_sweep_record(r) == "7.01,1.5,Pinned,0.812346,,2,ok\n");
    SweepRecord lost = record(9.2, 1e-6, std::nullopt);
    lost.phase.phase = Phase::NoKink;
    lost.status = "kink_lost";
    CHECK(format_sweep_record(lost) == "9.2,1,NoKink,,,0,kink_lost\n");
}

TEST_CASE("sweep writer resumes an interrupted file") {
    const std::string path = temp_path("resume.csv");
    const std::string header = "# demo\n" + sweep_header_line();
    const std::vector<std::pair<double, double>> cells = {{6.0, 1e-6}, {6.1, 1e-6}, {6.2, 1e-6}};
    std::filesystem::remove(path);
    {
        SweepCsvWriter w(path, header, cells);
        CHECK(w.completed() == 0);
        for (const auto& c : cells) w.append(record(c.first, c.second, 0.5));
    }
    const std::string full = slurp(path);

    // cut the file inside the third row
    std::filesystem::resize_file(path, full.size() - 5);
    {
        SweepCsvWriter w(path, header, cells);
        CHECK(w.completed() == 2);
        w.append(record(6.2, 1e-6, 0.5));
    }
    CHECK(slurp(path) == full);

    {
        SweepCsvWriter w(path, header, cells);
        CHECK(w.completed() == 3);
    }
    CHECK(slurp(path) == full);

    CHECK_THROWS_AS(SweepCsvWriter(path, "# other\n" + sweep_header_line(), cells), UsageError);
    const std::vector<std::pair<double, double>> shifted = {{6.0, 1e-6}, {6.15, 1e-6}, {6.2, 1e-6}};
    CHECK_THROWS_AS(SweepCsvWriter(path, header, shifted), UsageError);
    std::filesystem::remove(path);
}

TEST_CASE("spectrum and resonance tables") {
    std::ostringstream out;
    write_spectrum_header(out);
    SpectrumRow row;
    row.alpha = 6.0;
    row.spectrum.frequencies = Eigen::Vector2d(0.5, 1.0);
    row.scores = Eigen::Vector2d(0.9, 0.1);
    row.kink_mode = 0;
    write_spectrum_rows(out, row);
    CHECK(out.str() ==
          "alpha,mode_index,frequency_over_omega_z,localization_score,is_kink_mode\n"
          "6,0,0.5000000000,0.900000,1\n6,1,1.0000000000,0.100000,0\n");
    std::ostringstream res;
    write_resonance_csv(res, 7.01, {{33, 4, 20, 4.6e-4, 0.98}});
    CHECK(res.str() == "alpha,excited_mode,mode_a,mode_b,detuning,transport_weight\n7.01,33,4,20,4.600000e-04,0.980000\n");
}

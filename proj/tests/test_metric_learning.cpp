#include <cmath>
#include <random>

#include <doctest.h>

#include "platoon/metric_learning.hpp"

using namespace platoon;
using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_symmetric(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = g(rng);
    return m;
}

}  // namespace

TEST_CASE("metric quadratic form") {
    std::mt19937_64 rng(99);
    SUBCASE("identity weight gives the squared euclidean distance") {
        VectorXd x1(3), x2(3);
        x1 << 1, 2, 3;
        x2 << 4, 0, 3;
        CHECK(metric(x1, x2, MatrixXd::Identity(3, 3)) == doctest::Approx(13.0));
    }
    SUBCASE("zero at equal points") {
        VectorXd x = VectorXd::Random(4);
        CHECK(metric(x, x, MatrixXd::Identity(4, 4)) == 0.0);
    }
    SUBCASE("dimension mismatch throws") {
        CHECK_THROWS_AS(metric(VectorXd::Zero(2), VectorXd::Zero(3), MatrixXd::Identity(2, 2)),
                        std::invalid_argument);
    }
    SUBCASE("square-root metric satisfies sampled triangle inequalities") {
        for (int trial = 0; trial < 50; ++trial) {
            const MatrixXd A = project_epd(random_symmetric(3, rng), 0.01);
            const VectorXd x = VectorXd::Random(3), y = VectorXd::Random(3),
                           z = VectorXd::Random(3);
            const double dxz = std::sqrt(metric(x, z, A));
            const double dxy = std::sqrt(metric(x, y, A));
            const double dyz = std::sqrt(metric(y, z, A));
            CHECK(dxz <= dxy + dyz + 1e-12);
        }
    }
}

TEST_CASE("factorization") {
    std::mt19937_64 rng(321);
    SUBCASE("identity factors to an orthogonal B") {
        const MatrixXd B = factorize(MatrixXd::Identity(3, 3));
        CHECK((B * B.transpose() - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("diagonal case has known column norms") {
        MatrixXd A(2, 2);
        A << 4, 0, 0, 1;
        const MatrixXd B = factorize(A);
        CHECK((B * B.transpose() - A).cwiseAbs().maxCoeff() < 1e-10);
        const double n0 = B.col(0).norm(), n1 = B.col(1).norm();
        CHECK(std::min(n0, n1) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(std::max(n0, n1) == doctest::Approx(2.0).epsilon(1e-10));
    }
    SUBCASE("indefinite input is rejected") {
        MatrixXd A(2, 2);
        A << 1, 0, 0, -0.5;
        CHECK_THROWS_AS(factorize(A), std::invalid_argument);
    }
    SUBCASE("metric equals the projected squared norm") {
        for (int trial = 0; trial < 100; ++trial) {
            const MatrixXd A = project_epd(random_symmetric(2, rng), 0.01);
            const MatrixXd B = factorize(A);
            const VectorXd x1 = VectorXd::Random(2), x2 = VectorXd::Random(2);
            const double direct = metric(x1, x2, A);
            const double projected = (B.transpose() * (x1 - x2)).squaredNorm();
            CHECK(std::abs(direct - projected) <= 1e-10 * std::max(1.0, direct));
        }
    }
}

TEST_CASE("epsilon-PD projection") {
    std::mt19937_64 rng(4711);
    const double eps = 0.01;

    SUBCASE("identity is inside the cone") {
        CHECK((project_epd(MatrixXd::Identity(2, 2), eps) - MatrixXd::Identity(2, 2))
                  .cwiseAbs()
                  .maxCoeff() < 1e-14);
    }
    SUBCASE("diagonal clipping") {
        MatrixXd A(2, 2);
        A << 2, 0, 0, -1;
        const MatrixXd P = project_epd(A, eps);
        CHECK(P(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(P(1, 1) == doctest::Approx(eps).epsilon(1e-12));
        CHECK(std::abs(P(0, 1)) < 1e-14);
    }
    SUBCASE("idempotent with eigenvalues above the floor") {
        for (int trial = 0; trial < 50; ++trial) {
            const MatrixXd A = random_symmetric(3, rng, 2.0);
            const MatrixXd P = project_epd(A, eps);
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(P);
            CHECK(es.eigenvalues().minCoeff() >= eps - 1e-12);
            CHECK((project_epd(P, eps) - P).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
    SUBCASE("closer in Frobenius norm than sampled cone members") {
        for (int trial = 0; trial < 10; ++trial) {
            const MatrixXd A = random_symmetric(2, rng, 2.0);
            const MatrixXd P = project_epd(A, eps);
            const double dist = (P - A).norm();
            for (int sample = 0; sample < 100; ++sample) {
                const MatrixXd X = project_epd(random_symmetric(2, rng, 2.0), eps);
                CHECK(dist <= (X - A).norm() + 1e-12);
            }
        }
    }
    SUBCASE("non-symmetric input is an explicit error") {
        MatrixXd A(2, 2);
        A << 1, 0.5, 0.2, 1;
        CHECK_THROWS_AS(project_epd(A, eps), std::invalid_argument);
    }
}

TEST_CASE("subspace projection") {
    SUBCASE("identity weight is the identity map") {
        std::vector<VectorXd> pts{VectorXd::Random(2), VectorXd::Random(2)};
        const auto proj = project_subspace(pts, MatrixXd::Identity(2, 2));
        for (std::size_t i = 0; i < pts.size(); ++i)
            CHECK((proj[i] - pts[i]).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("equal points collapse to zero separation") {
        std::mt19937_64 rng(5);
        const MatrixXd A = project_epd(random_symmetric(2, rng), 0.01);
        VectorXd x = VectorXd::Random(2);
        const auto proj = project_subspace(std::vector<VectorXd>{x, x}, A);
        CHECK((proj[0] - proj[1]).norm() == 0.0);
    }
}

TEST_CASE("ADMM weight updates") {
    const Topology topo = Topology::build(TopologyKind::PF, 2);
    AdmmOptions opts;

    SUBCASE("random initialization is feasible") {
        std::mt19937_64 rng(2024);
        const AdmmState state = admm_init(topo, opts, rng);
        CHECK(check_invariants(state, topo, opts.epsilon).ok(1e-12));
    }

    SUBCASE("zero-cost context drives Q to the proximal minimizer") {
        std::mt19937_64 rng(7);
        AdmmState state = admm_init(topo, opts, rng);
        const Matrix2d theta_prev = state.vehicles[0].theta;
        const Matrix2d omega_prev = state.vehicles[0].omega;
        AdmmOptions strong = opts;
        strong.learning_rate = 5.0;  // lr * rho = 0.5 per iteration
        strong.gradient_iterations = 200;
        std::vector<WeightGradients> grads(2);  // all-zero gradients
        admm_update_weights(state, grads, topo, strong);
        CHECK((state.vehicles[0].weights.Q - (theta_prev - omega_prev)).cwiseAbs().maxCoeff() <
              1e-8);
    }

    SUBCASE("theta equals Q plus omega when already in the cone") {
        std::mt19937_64 rng(8);
        AdmmState state = admm_init(topo, opts, rng);
        state.vehicles[0].weights.Q = Matrix2d::Identity() * 2.0;
        state.vehicles[0].omega = Matrix2d::Identity() * 0.5;
        AdmmOptions frozen = opts;
        frozen.gradient_iterations = 0;  // keep Q fixed, exercise the closed-form step
        std::vector<WeightGradients> grads(2);
        admm_update_weights(state, grads, topo, frozen);
        CHECK((state.vehicles[0].theta - Matrix2d::Identity() * 2.5).cwiseAbs().maxCoeff() <
              1e-12);
    }

    SUBCASE("unpinned Q and empty-in-neighbor G stay zero") {
        std::mt19937_64 rng(9);
        AdmmState state = admm_init(topo, opts, rng);
        std::vector<WeightGradients> grads(2);
        grads[0].dG = Matrix2d::Identity();
        grads[1].dQ = Matrix2d::Identity();
        admm_update_weights(state, grads, topo, opts);
        CHECK(state.vehicles[0].weights.G.cwiseAbs().maxCoeff() == 0.0);  // head has no N_i
        CHECK(state.vehicles[1].weights.Q.cwiseAbs().maxCoeff() == 0.0);  // tail is unpinned
    }

    SUBCASE("R descends onto its floor") {
        std::mt19937_64 rng(10);
        AdmmState state = admm_init(topo, opts, rng);
        std::vector<WeightGradients> grads(2);
        grads[0].dR = 100.0;
        admm_update_weights(state, grads, topo, opts);
        CHECK(state.vehicles[0].weights.R == opts.epsilon);
    }

    SUBCASE("stability projection keeps F above the out-neighbor sum") {
        std::mt19937_64 rng(11);
        AdmmState state = admm_init(topo, opts, rng);
        std::vector<WeightGradients> grads(2);
        grads[0].dF = Matrix2d::Identity() * 50.0;  // push F hard toward zero
        grads[1].dG = -Matrix2d::Identity() * 5.0;  // grow the follower's G
        for (int sweep = 0; sweep < 5; ++sweep) {
            admm_update_weights(state, grads, topo, opts);
            const InvariantMargins m = check_invariants(state, topo, opts.epsilon);
            CHECK(m.f_stability >= -1e-10);
            CHECK(m.ok(1e-10));
        }
    }
}

TEST_CASE("weight gradients match finite differences of the objective") {
    std::mt19937_64 rng(31337);
    const PhysicalConstants c;
    VehicleParams p;
    const int np = 6;
    std::normal_distribution<double> g(0.0, 1.0);

    std::vector<double> controls(np);
    for (auto& u : controls) u = 200.0 + 100.0 * g(rng);
    const VehicleState x0{1.0, 19.5, 180.0};
    const HorizonTrajectory traj = rollout(p, c, x0, controls);

    NeighborData nbr;
    NeighborTrajectory f1;
    f1.id = 1;
    f1.gap_m = 10.0;
    f1.assumed.resize(np + 1);
    for (auto& y : f1.assumed) y = {10.0 + g(rng), 20.0 + 0.1 * g(rng)};
    nbr.followers.push_back(f1);
    NeighborTrajectory leader;
    leader.id = 0;
    leader.gap_m = 20.0;
    leader.assumed.resize(np + 1);
    for (auto& y : leader.assumed) y = {20.0 + g(rng), 20.0};
    nbr.leader = leader;
    std::vector<OutputVec> desired(np + 1);
    for (auto& y : desired) y = {g(rng), 20.0 + 0.1 * g(rng)};

    const WeightGradients grads = weight_gradients(traj, desired, nbr, desired, p, c);

    WeightSet base;
    base.Q = Matrix2d::Identity();
    base.F = Matrix2d::Identity();
    base.G = Matrix2d::Identity();
    base.R = 0.5;
    const double h = 1e-6;
    auto eval = [&](const WeightSet& w) {
        return objective(traj, desired, nbr, desired, w, p, c);
    };
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            WeightSet up = base, down = base;
            up.Q(a, b) += h;
            down.Q(a, b) -= h;
            CHECK(grads.dQ(a, b) ==
                  doctest::Approx((eval(up) - eval(down)) / (2 * h)).epsilon(1e-5));
            up = base;
            down = base;
            up.F(a, b) += h;
            down.F(a, b) -= h;
            CHECK(grads.dF(a, b) ==
                  doctest::Approx((eval(up) - eval(down)) / (2 * h)).epsilon(1e-5));
            up = base;
            down = base;
            up.G(a, b) += h;
            down.G(a, b) -= h;
            CHECK(grads.dG(a, b) ==
                  doctest::Approx((eval(up) - eval(down)) / (2 * h)).epsilon(1e-5));
        }
    WeightSet up = base, down = base;
    up.R += h;
    down.R -= h;
    CHECK(grads.dR == doctest::Approx((eval(up) - eval(down)) / (2 * h)).epsilon(1e-5));
}

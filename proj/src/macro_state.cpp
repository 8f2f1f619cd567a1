#include "vaedyn/macro_state.hpp"

#include <cmath>

namespace vaedyn {

std::vector<std::string> flat_labels(int M, int M_star) {
    std::vector<std::string> out;
    out.reserve(flat_size(M, M_star));
    auto name = [](const char* p, int i, int j) {
        return std::string(p) + "_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
    };
    for (int i = 0; i < M; ++i)
        for (int l = 0; l < M_star; ++l) out.push_back(name("m", i, l));
    for (int i = 0; i < M; ++i)
        for (int l = 0; l < M_star; ++l) out.push_back(name("d", i, l));
    for (int i = 0; i < M; ++i)
        for (int j = i; j < M; ++j) out.push_back(name("Q", i, j));
    for (int i = 0; i < M; ++i)
        for (int j = i; j < M; ++j) out.push_back(name("E", i, j));
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) out.push_back(name("R", i, j));
    for (int i = 0; i < M; ++i) out.push_back("D_" + std::to_string(i + 1));
    return out;
}

double frobenius_distance(const Macro& a, const Macro& b) {
    return std::sqrt((a.m - b.m).squaredNorm() + (a.d - b.d).squaredNorm() + (a.Q - b.Q).squaredNorm() +
                     (a.E - b.E).squaredNorm() + (a.R - b.R).squaredNorm() + (a.D - b.D).squaredNorm());
}

Macro measure_macro(const MicroState& s, const GenerativeConfig& cfg) {
    require(s.W.rows() == cfg.N && s.V.rows() == cfg.N, "measure: N mismatch between student and teacher");
    require(s.W.cols() == s.V.cols() && s.D.size() == s.W.cols(), "measure: latent dimension mismatch");
    const double N = cfg.N;
    Macro out;
    out.m = s.W.transpose() * cfg.W_star / N;
    out.d = s.V.transpose() * cfg.W_star / N;
    out.Q = s.W.transpose() * s.W / N;
    out.E = s.V.transpose() * s.V / N;
    out.R = s.W.transpose() * s.V / N;
    out.D = s.D;
    out.symmetrize();
    return out;
}

Macro expected_initial_macro(int M, int M_star, const InitOptions& init) {
    const MatrixXd a = planted_overlaps(M, M_star, init.overlap);
    const MatrixXd aa = a.transpose() * a;
    const double s2 = init.scale * init.scale;
    Macro out = Macro::zeros(M, M_star);
    out.m = a.transpose();
    out.d = a.transpose();
    out.Q = aa + s2 * MatrixXd::Identity(M, M);
    out.E = out.Q;
    out.R = aa;
    out.D.setOnes();
    return out;
}

void check_macro(const Macro& s, double sym_tol) {
    const bool finite = s.m.allFinite() && s.d.allFinite() && s.Q.allFinite() && s.E.allFinite() &&
                        s.R.allFinite() && s.D.allFinite();
    if (!finite) throw NumericalError("macro state has non-finite entries");
    if ((s.Q - s.Q.transpose()).cwiseAbs().maxCoeff() > sym_tol ||
        (s.E - s.E.transpose()).cwiseAbs().maxCoeff() > sym_tol)
        throw NumericalError("macro state lost symmetry of Q or E");
    for (int i = 0; i < s.D.size(); ++i)
        if (!(s.D[i] > 0.0))
            throw NumericalError("posterior variance D_" + std::to_string(i + 1) + " crossed zero; step too large");
}

}  // namespace vaedyn

// Precode one 16QAM symbol vector over a random 4x4 Rayleigh channel with
// every precoder and print transmit power, objective and CIR support size.

#include <iostream>

#include "slp/channel_sim.hpp"
#include "slp/precoder.hpp"

int main() {
  using namespace slp;
  const ModulationScheme scheme = ModulationScheme::qam(16);
  const Constellation con(scheme);
  Rng rng = make_stream(7, 0, 0);
  const CMatrix H = generate_rayleigh(4, 4, rng);
  CVector s(4);
  s << con.value(0), con.value(5), con.value(15), con.value(3);

  PrecoderInput in = make_input(s, H, /*sigma2=*/0.1, /*P_T=*/1.0, scheme);
  const FactorCache reg = build_factor_cache(in);
  const FactorCache zfc = build_zf_cache(in);

  for (PrecoderKind kind : {PrecoderKind::ZF, PrecoderKind::MMSE, PrecoderKind::CI_ZF,
                            PrecoderKind::CI_MMSE}) {
    const PrecoderOutput out = precode(kind, in, uses_zf_cache(kind) ? zfc : reg);
    std::cout << precoder_name(kind) << ": |u|^2=" << out.u.squaredNorm()
              << " gamma=" << out.gamma << " f=" << out.objective << " K_T=" << out.k_t << '\n';
  }
}

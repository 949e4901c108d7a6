// Walks through the main pieces on small inputs: a cover and its Cech
// numbers, a product section that no element sees, a two-layer sum-pooling
// network, and an offset that moves its features without moving its output.

#include <cmath>
#include <iostream>

#include "sheafnet/sheafnet.hpp"

using namespace sheafnet;

int main() {
  // Three marked points with fibers R, R^2, R, covered by two overlapping sets.
  const MarkedSpace space({1, 2, 1});
  const Cover cover = make_cover(space, {PointSet{0, 1}, PointSet{1, 2}});
  const CohomologyResult c = cech_cohomology(cover, 1, 1);
  std::cout << "H^0 = " << c.h[0] << ", H^1 = " << c.h[1] << "\n";

  // y_1 * y_2 * y_3 * y_4 restricts to zero on both sets but is 1 at (1,1,1,1).
  const Section h = product_counterexample(space, space.all_points(), 1);
  const Section on_first = restrict_to(space, h, space.all_points(), cover[0].members);
  std::cout << "h(1,1,1,1) = " << h({1, 1, 1, 1})[0] << ", restriction constant: " << std::boolalpha
            << on_first.is_constant() << "\n";

  // Sum pooling 4 -> 2 -> 1 and an attack on its first layer.
  const Network net = build_sum_pool_demo();
  const AttackResult attack = adversarial_attack(net, 0, 2.0, 4.0, 7);
  std::cout << "offsets:";
  for (const auto& m : attack.spec.m) std::cout << " " << m[0];
  std::cout << "\ndisplacement " << attack.spec.displacement << " > 4, output unchanged: "
            << (attack.report.verdict ? "yes" : "no") << "\n";

  const Vec x{0.5, -1.0, 2.0, 0.25};
  const Section g = global_section(net, Deviation::zero(net.space()));
  std::cout << "forward " << forward_output(net, x)[0] << " = section " << g(x)[0] << "\n";
  return attack.report.verdict && std::abs(forward_output(net, x)[0] - 1.75) < 1e-12 ? 0 : 1;
}

#include "cassi/validation.hpp"
#include "doctest.h"

using namespace cassi;

TEST_CASE("validation checks on SP") {
  CHECK(check_minimum_deviation().pass);
  const OpticalSystem sp(build_reference_system(ReferenceSystem::SP));
  const auto adj = check_adjoint(sp, 3, 9);
  CHECK(adj.pass);
  CHECK(adj.detail.find("3 pairs") != std::string::npos);
  CHECK(check_determinism(sp, 4).pass);
}

TEST_CASE("slit report layout") {
  RenderConfig cfg;
  cfg.rays_per_pixel = 4;
  const OpticalSystem sp(build_reference_system(ReferenceSystem::SP));
  CHECK_THROWS_AS(slit_spectrometer_test(sp, cfg, 26, 56), DomainError);
  const auto rep = slit_spectrometer_test(sp, cfg, 30, 56);
  CHECK(rep.slit_column == 15);
  REQUIRE(rep.regions.size() == 3);
  for (const auto& r : rep.regions) {
    CHECK(r.row_begin < r.row_end);
    CHECK(r.rendered.size() == r.reference.size());
    CHECK(r.relative_rmse >= 0.0);
    CHECK(r.relative_rmse <= rep.worst());
  }
}

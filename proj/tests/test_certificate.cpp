#include "doctest.h"
#include "ellcone/certificate.hpp"
#include "support/rng.hpp"

using namespace ellcone::cert;

namespace {

Step thm1_step(double lam, double beta) {
  // 1-D instance: Ell(1,0) inside Ell(1/4,0).
  Step s;
  s.tag = "ell_includes";
  s.claim = "Ell(1,0) contained in Ell(1/4,0)";
  const double Q[1] = {1.0};
  const double c[1] = {0.0};
  const double Qs[1] = {0.25};
  s.add_matrix("Q", 1, 1, Q);
  s.add_vector("c", c);
  s.add_matrix("Qs", 1, 1, Qs);
  s.add_vector("cs", c);
  s.add_scalar("lam", lam);
  s.add_scalar("beta", beta);
  return s;
}

}  // namespace

TEST_CASE("serialize/parse round-trip is byte identical") {
  Certificate c;
  c.steps.push_back(thm1_step(0.2500001, -0.7499997));
  Step s2;
  s2.tag = "psd";
  s2.claim = "identity is positive definite";
  const double I2[4] = {1, 0, 0, 1};
  s2.add_matrix("M", 2, 2, I2);
  c.steps.push_back(s2);
  Step s3;
  s3.tag = "ctr_inc";
  s3.claim = "counter step";
  s3.add_scalar("lam", 0.1);
  s3.add_scalar("v", 0.2);
  s3.add_scalar("lam_new", 0.2999999999);
  c.steps.push_back(s3);

  std::string text = serialize(c);
  Certificate back = parse(text);
  CHECK(serialize(back) == text);
  CHECK(back.steps.size() == 3);
  CHECK(back.steps[0].scalar("lam") == 0.2500001);
}

TEST_CASE("replay certifies an interior Thm-1 witness") {
  std::string why;
  CHECK(replay_step(thm1_step(0.2500001, -0.7499997), &why) ==
        StepVerdict::Certified);
}

TEST_CASE("replay rejects boundary and tampered witnesses") {
  std::string why;
  // The exact optimum sits on the psd boundary: strict checking says Unknown.
  CHECK(replay_step(thm1_step(0.25, -0.75), &why) == StepVerdict::Unknown);
  // Sign-flipped multiplier.
  CHECK(replay_step(thm1_step(-0.2500001, -0.7499997), &why) ==
        StepVerdict::Unknown);
  // Positive beta claims a non-inclusion.
  CHECK(replay_step(thm1_step(0.2500001, 0.5), &why) == StepVerdict::Unknown);
}

TEST_CASE("replay handles unknown tags and malformed payloads") {
  Step s;
  s.tag = "no_such_tag";
  s.claim = "?";
  std::string why;
  CHECK(replay_step(s, &why) == StepVerdict::Unknown);

  Step asym;
  asym.tag = "psd";
  asym.claim = "asymmetric payload";
  const double bad[4] = {1, 2, 3, 4};
  asym.add_matrix("M", 2, 2, bad);
  CHECK(replay_step(asym, &why) == StepVerdict::Unknown);
}

TEST_CASE("empty certificate replays vacuously") {
  Certificate c;
  ReplayReport rep = replay(c);
  CHECK(rep.all_certified);
  CHECK(rep.checked == 0);
}

TEST_CASE("parse rejects malformed input") {
  CHECK_THROWS_AS(parse("bogus"), CertificateFormatError);
  CHECK_THROWS_AS(parse("ellcone-certificate v1\nstep x\nclaim y\n"),
                  CertificateFormatError);  // unterminated
  CHECK_THROWS_AS(
      parse("ellcone-certificate v1\nstep x\nclaim y\nscalar a zz\nend\n"),
      CertificateFormatError);
}

TEST_CASE("level and increment steps compare exactly") {
  Step s;
  s.tag = "cone_levels";
  s.claim = "levels";
  const double lams[2] = {1.0, 0.0};
  const double lamsp[2] = {0.0, 0.0};
  const std::uint8_t bsp[2] = {1, 0};
  s.add_vector("lams", lams);
  s.add_vector("lamsp", lamsp);
  s.add_bools("bsp", bsp);
  std::string why;
  CHECK(replay_step(s, &why) == StepVerdict::Certified);

  Step bad = s;
  bad.items[2].second.flags[0] = 0;  // raised level now lacks the flag
  CHECK(replay_step(bad, &why) == StepVerdict::Unknown);

  Step inc;
  inc.tag = "ctr_inc";
  inc.claim = "0.1 + 0.2 rounded down";
  inc.add_scalar("lam", 0.1);
  inc.add_scalar("v", 0.2);
  inc.add_scalar("lam_new", 0.30000000000000004);  // exact double sum, too high
  CHECK(replay_step(inc, &why) == StepVerdict::Unknown);
  Step inc2;
  inc2.tag = "ctr_inc";
  inc2.claim = "sound";
  inc2.add_scalar("lam", 0.1);
  inc2.add_scalar("v", 0.2);
  inc2.add_scalar("lam_new", 0.2999999999999999);
  CHECK(replay_step(inc2, &why) == StepVerdict::Certified);
}

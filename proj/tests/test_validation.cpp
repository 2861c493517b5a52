#include <gtest/gtest.h>

#include <sstream>

#include "spmvd/commands.hpp"
#include "spmvd/validation.hpp"

namespace spmvd {
namespace {

TEST(Validation, SmallScalePasses) {
  const ValidationReport r = run_validation();
  ASSERT_EQ(r.suites.size(), 5U);
  for (const auto& s : r.suites) EXPECT_TRUE(s.passed()) << s.name;
  EXPECT_TRUE(r.passed());
}

TEST(Validation, InjectedFaultBreaksOnlyIdentity) {
  ValidationOptions opt;
  opt.c_fault = 1e-3;
  const ValidationReport r = run_validation(opt);
  EXPECT_FALSE(r.passed());
  for (const auto& s : r.suites) EXPECT_EQ(s.passed(), s.name != "mvd-identity") << s.name;
}

TEST(Validation, ReportListsSuitesWithDeviationsAndExitCode) {
  std::ostringstream out;
  EXPECT_EQ(cmd_validate(ValidationOptions{}, out), kExitOk);
  const std::string text = out.str();
  for (const char* name :
       {"kernel-normalization", "mvd-identity", "sampler", "contraction", "mixture"})
    EXPECT_NE(text.find(std::string("PASS ") + name + "  max deviation"), std::string::npos)
        << name;

  ValidationOptions bad;
  bad.c_fault = 1e-3;
  std::ostringstream bad_out;
  EXPECT_EQ(cmd_validate(bad, bad_out), kExitValidation);
  EXPECT_NE(bad_out.str().find("FAIL mvd-identity"), std::string::npos);
}

TEST(Validation, SamplerSuiteDetectsWrongLaw) {
  // A sampler check against the wrong target must fail: feed chi-square a
  // law with one cell's mass moved.
  UniformStream s(4);
  std::vector<std::uint64_t> counts(16, 0);
  for (int k = 0; k < 100000; ++k) ++counts[s.next_u64() % 16];
  std::vector<double> probs(16, 1.0 / 16.0);
  EXPECT_GT(chi_square_gof(counts, probs).p_value, 1e-3);
  probs[0] = 1.5 / 16.0;
  probs[1] = 0.5 / 16.0;
  EXPECT_LT(chi_square_gof(counts, probs).p_value, 1e-3);
}

}  // namespace
}  // namespace spmvd

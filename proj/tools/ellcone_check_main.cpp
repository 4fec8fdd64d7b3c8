#include <fstream>
#include <iostream>
#include <sstream>

#include "ellcone/certificate.hpp"

// Independent certificate checker. Links only the interval core and the
// certificate reader; no solver, no Eigen, no analyzer.

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: ellcone-check <certificate>\n";
    return 1;
  }
  std::ifstream in(argv[1], std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << argv[1] << "\n";
    return 1;
  }
  std::ostringstream ss;
  ss << in.rdbuf();

  ellcone::cert::Certificate cert;
  try {
    cert = ellcone::cert::parse(ss.str());
  } catch (const ellcone::cert::CertificateFormatError& e) {
    std::cerr << "malformed certificate: " << e.what() << "\n";
    return 1;
  }

  for (size_t i = 0; i < cert.steps.size(); ++i) {
    std::string why;
    auto v = ellcone::cert::replay_step(cert.steps[i], &why);
    if (v != ellcone::cert::StepVerdict::Certified) {
      std::cout << "UNKNOWN step " << i << " (" << cert.steps[i].tag
                << "): " << why << "\n";
      std::cout << "claim: " << cert.steps[i].claim << "\n";
      return 3;
    }
  }
  std::cout << "certified: " << cert.steps.size() << " steps replayed\n";
  return 0;
}

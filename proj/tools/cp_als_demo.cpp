// Fits a CP model to a .tns file (or a random tensor) and prints the fit trace.
//
//   cp_als_demo tensor.tns 8
//   cp_als_demo            # 100x120x140 random tensor, rank 10

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "spcp/spcp.hpp"

int main(int argc, char** argv) {
  try {
    spcp::SparseTensor X;
    if (argc > 1) {
      std::ifstream in(argv[1]);
      if (!in) throw spcp::Error(std::string("cannot open ") + argv[1]);
      X = spcp::read_tns(in);
    } else {
      X = spcp::random_sparse({100, 120, 140}, 50'000, 7);
    }

    spcp::AlsOptions opts;
    opts.rank = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 10;
    opts.max_iters = 50;
    opts.variant = spcp::Variant::permuted;
    const auto result = spcp::cp_als(X, opts);

    std::cout << "order " << X.ndims() << ", " << X.nnz() << " nonzeros, rank " << opts.rank << "\n";
    for (std::size_t k = 0; k < result.trace.fits.size(); ++k) {
      std::cout << "iter " << k + 1 << "  fit " << result.trace.fits[k] << "\n";
    }
    std::cout << "mttkrp " << result.trace.total_mttkrp_seconds() << " s of " << result.trace.total_seconds
              << " s total\n";
  } catch (const std::exception& e) {
    std::cerr << "cp_als_demo: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

#include <complex>
#include <vector>

namespace collapsim {

using cplx = std::complex<double>;

// Thin wrapper over FFTW. Conventions are plain DFT sums:
//   forward:  X_k = sum_j x_j exp(-2*pi*i*j*k/N)
//   backward: x_j = sum_k X_k exp(+2*pi*i*j*k/N)
// Neither applies a 1/N factor. Plans are cached per size and reused;
// execution is thread-safe, plan creation is serialized internally.
namespace fft {

void forward(std::vector<cplx>& data);
void backward(std::vector<cplx>& data);

}  // namespace fft
}  // namespace collapsim

#include "collapsim/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace collapsim {
namespace fft {

namespace {

std::mutex plan_mutex;
std::map<std::pair<int, int>, fftw_plan> plan_cache;

fftw_plan plan_for(int n, int sign) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto key = std::make_pair(n, sign);
    auto it = plan_cache.find(key);
    if (it != plan_cache.end()) return it->second;
    // FFTW_UNALIGNED lets the plan execute on any buffer via fftw_execute_dft.
    std::vector<cplx> scratch(static_cast<std::size_t>(n));
    fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(scratch.data()),
                                   reinterpret_cast<fftw_complex*>(scratch.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("fftw plan creation failed");
    plan_cache.emplace(key, p);
    return p;
}

void run(std::vector<cplx>& data, int sign) {
    if (data.empty()) throw std::invalid_argument("fft of empty vector");
    fftw_plan p = plan_for(static_cast<int>(data.size()), sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data.data()),
                     reinterpret_cast<fftw_complex*>(data.data()));
}

}  // namespace

void forward(std::vector<cplx>& data) { run(data, FFTW_FORWARD); }
void backward(std::vector<cplx>& data) { run(data, FFTW_BACKWARD); }

}  // namespace fft
}  // namespace collapsim

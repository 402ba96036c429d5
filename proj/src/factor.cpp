#include "pgm/factor_impl.hpp"

namespace pgm {

template class BasicFactor<double>;

template BasicFactor<double> product(const BasicFactor<double>&, const BasicFactor<double>&);
template BasicFactor<double> combine(const BasicFactor<double>&, const BasicFactor<double>&,
                                     const Semiring<double>&);
template BasicFactor<double> eliminate(const BasicFactor<double>&, const std::vector<std::string>&,
                                       const Semiring<double>&);
template BasicFactor<double> marginalize_to(const BasicFactor<double>&, const std::vector<std::string>&,
                                            const Semiring<double>&);
template BasicFactor<double> reduce(const BasicFactor<double>&, const IndexEvidence&);
template BasicFactor<double> reduce(const BasicFactor<double>&, const Evidence&);
template BasicFactor<double> mask(const BasicFactor<double>&, const IndexEvidence&);
template std::pair<BasicFactor<double>, double> normalize(const BasicFactor<double>&);
template BasicFactor<double> divide(const BasicFactor<double>&, const BasicFactor<double>&);
template BasicFactor<double> reorder(const BasicFactor<double>&, const std::vector<std::string>&);
template bool approx_equal(const BasicFactor<double>&, const BasicFactor<double>&, double);
template std::size_t argmax_index(const BasicFactor<double>&);

}  // namespace pgm

#pragma once

#include <stdexcept>
#include <string>

namespace meancurve {

//! Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// grid_kernel
class AllWeightsZero : public Error { public: using Error::Error; };
class AssumptionA3Violated : public Error { public: using Error::Error; };

// population / config
class InvalidConfig : public Error { public: using Error::Error; };

// design
class IndexOutOfRange : public Error { public: using Error::Error; };
class InvalidDesign : public Error { public: using Error::Error; };
class TooLargeToEnumerate : public Error { public: using Error::Error; };

// response
class ZeroResponders : public Error { public: using Error::Error; };

// estimators
class ZeroTheta : public Error { public: using Error::Error; };
class ZeroDenominator : public Error { public: using Error::Error; };
class ZeroDenominatorInstant : public Error { public: using Error::Error; };

// variance
class NotStratified : public Error { public: using Error::Error; };
class NoClosedFormJoint : public Error { public: using Error::Error; };
class ZeroJointInclusion : public Error { public: using Error::Error; };

// bandwidth
class TooFewUnits : public Error { public: using Error::Error; };
class AllCandidatesFailed : public Error { public: using Error::Error; };

// cli
class ConfigError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

} // namespace meancurve

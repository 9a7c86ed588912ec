// errors.hpp - exception taxonomy shared by all flowguard modules
#pragma once

#include <stdexcept>
#include <string>

namespace flowguard {

// base for every domain error; catch this to map failures to CLI exit codes
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define FLOWGUARD_ERROR(NAME)                                        \
    struct NAME : Error {                                            \
        explicit NAME(const std::string& msg) : Error(#NAME ": " + msg) {} \
    }

// dataset
FLOWGUARD_ERROR(MissingColumn);
FLOWGUARD_ERROR(NonNumericContinuous);
FLOWGUARD_ERROR(EmptyFile);
FLOWGUARD_ERROR(EmptyTable);
FLOWGUARD_ERROR(SchemaMismatch);
FLOWGUARD_ERROR(InvalidDimensions);
FLOWGUARD_ERROR(TooFewRows);
FLOWGUARD_ERROR(ClassMissing);

// ssl
FLOWGUARD_ERROR(DimensionMismatch);
FLOWGUARD_ERROR(DegenerateEmbedding);
FLOWGUARD_ERROR(WindowTooShort);
FLOWGUARD_ERROR(NotTemporal);
FLOWGUARD_ERROR(InsufficientData);

// qga
FLOWGUARD_ERROR(LengthMismatch);
FLOWGUARD_ERROR(TooLarge);

// detect
FLOWGUARD_ERROR(SingleClassTraining);

// io
FLOWGUARD_ERROR(MissingInput);
FLOWGUARD_ERROR(VersionMismatch);
FLOWGUARD_ERROR(BadConfig);

#undef FLOWGUARD_ERROR

} // namespace flowguard

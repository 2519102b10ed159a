#pragma once

#include <string>

#include "hybridpay/channel.hpp"
#include "hybridpay/crypto.hpp"
#include "hybridpay/message.hpp"

namespace testing {

using namespace hybridpay;

inline const PartyId kAlice{"Alice", Role::Participant};
inline const PartyId kIngrid{"Ingrid", Role::Participant};
inline const PartyId kBankA{"B_A", Role::Bank};
inline const PartyId kBankI{"B_I", Role::Bank};
inline const PartyId kRegulator{"Regulator", Role::Regulator};

/// Keys for the five standard parties plus a directory that knows them all.
struct World {
    std::shared_ptr<const SignatureScheme> scheme;
    KeyPair alice, ingrid, bankA, bankI, regulator;
    KeyDirectory dir;

    explicit World(const std::string& schemeName = "ed25519", std::uint64_t seed = 7)
        : scheme(make_scheme(schemeName)),
          alice(generate_key(scheme, kAlice, seed)),
          ingrid(generate_key(scheme, kIngrid, seed)),
          bankA(generate_key(scheme, kBankA, seed)),
          bankI(generate_key(scheme, kBankI, seed)),
          regulator(generate_key(scheme, kRegulator, seed)),
          dir(scheme)
    {
        for (const auto* k : {&alice, &ingrid, &bankA, &bankI, &regulator})
            dir.add(*k);
    }
};

inline std::string source_path(const std::string& rel)
{
    return std::string(HYBRIDPAY_SOURCE_DIR) + "/" + rel;
}

} // namespace testing

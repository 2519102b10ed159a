#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybridpay/value.hpp"

namespace hybridpay {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

Digest sha256(ByteView data);
Digest sha256(std::string_view text);
std::string to_hex(ByteView data);
std::optional<Bytes> from_hex(std::string_view hex);

class SignatureScheme;

struct KeyPair {
    PartyId owner;
    Bytes publicKey;
    Bytes secretKey;
    std::shared_ptr<const SignatureScheme> scheme;
};

/// Deterministic signature scheme. Protocol code only talks to this interface.
class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;

    virtual std::string_view name() const = 0;
    /// Derives a keypair from a 32-byte seed.
    virtual KeyPair derive(const PartyId& owner, const Digest& seed,
                           std::shared_ptr<const SignatureScheme> self) const = 0;
    virtual Bytes sign(const KeyPair& key, ByteView message) const = 0;
    virtual bool verify(ByteView publicKey, ByteView message, ByteView signature) const = 0;
};

/// Ed25519 via libsodium.
class Ed25519Scheme final : public SignatureScheme {
public:
    std::string_view name() const override { return "ed25519"; }
    KeyPair derive(const PartyId& owner, const Digest& seed,
                   std::shared_ptr<const SignatureScheme> self) const override;
    Bytes sign(const KeyPair& key, ByteView message) const override;
    bool verify(ByteView publicKey, ByteView message, ByteView signature) const override;
};

/// HMAC-SHA256 stand-in: the verification key equals the signing key, so only
/// holders of the directory can verify. Fast, and enough for closed simulations.
class HmacScheme final : public SignatureScheme {
public:
    std::string_view name() const override { return "hmac-sha256"; }
    KeyPair derive(const PartyId& owner, const Digest& seed,
                   std::shared_ptr<const SignatureScheme> self) const override;
    Bytes sign(const KeyPair& key, ByteView message) const override;
    bool verify(ByteView publicKey, ByteView message, ByteView signature) const override;
};

std::shared_ptr<const SignatureScheme> make_scheme(std::string_view name);

/// Generates a keypair for `owner` from a run seed. Same seed, same keys.
KeyPair generate_key(const std::shared_ptr<const SignatureScheme>& scheme, const PartyId& owner,
                     std::uint64_t seed);

/// Scenario-wide registry of verification keys, keyed by party name.
class KeyDirectory {
public:
    explicit KeyDirectory(std::shared_ptr<const SignatureScheme> scheme) : scheme_(std::move(scheme)) {}

    void add(const PartyId& party, Bytes publicKey);
    void add(const KeyPair& key) { add(key.owner, key.publicKey); }

    std::optional<PartyId> party(std::string_view name) const;
    bool verify(const PartyId& signer, ByteView message, ByteView signature) const;
    const SignatureScheme& scheme() const { return *scheme_; }

private:
    struct Entry {
        PartyId party;
        Bytes publicKey;
    };
    std::shared_ptr<const SignatureScheme> scheme_;
    std::map<std::string, Entry, std::less<>> entries_;
};

} // namespace hybridpay

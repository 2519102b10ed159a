#include "hybridpay/crypto.hpp"

#include <sodium.h>

#include <cstring>

namespace hybridpay {

namespace {

struct SodiumInit {
    SodiumInit()
    {
        if (sodium_init() < 0)
            throw std::runtime_error("libsodium initialisation failed");
    }
};

void ensure_sodium()
{
    static const SodiumInit init;
}

} // namespace

Digest sha256(ByteView data)
{
    ensure_sodium();
    Digest out{};
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

Digest sha256(std::string_view text)
{
    return sha256(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string to_hex(ByteView data)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

std::optional<Bytes> from_hex(std::string_view hex)
{
    if (hex.size() % 2 != 0)
        return std::nullopt;
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]);
        int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0)
            return std::nullopt;
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

KeyPair Ed25519Scheme::derive(const PartyId& owner, const Digest& seed,
                              std::shared_ptr<const SignatureScheme> self) const
{
    ensure_sodium();
    KeyPair key{owner, Bytes(crypto_sign_PUBLICKEYBYTES), Bytes(crypto_sign_SECRETKEYBYTES), std::move(self)};
    crypto_sign_seed_keypair(key.publicKey.data(), key.secretKey.data(), seed.data());
    return key;
}

Bytes Ed25519Scheme::sign(const KeyPair& key, ByteView message) const
{
    ensure_sodium();
    if (key.secretKey.size() != crypto_sign_SECRETKEYBYTES)
        fail(Errc::Malformed, "ed25519 secret key has wrong length");
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), key.secretKey.data());
    return sig;
}

bool Ed25519Scheme::verify(ByteView publicKey, ByteView message, ByteView signature) const
{
    ensure_sodium();
    if (publicKey.size() != crypto_sign_PUBLICKEYBYTES || signature.size() != crypto_sign_BYTES)
        return false;
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(), publicKey.data()) == 0;
}

KeyPair HmacScheme::derive(const PartyId& owner, const Digest& seed,
                           std::shared_ptr<const SignatureScheme> self) const
{
    Bytes secret(seed.begin(), seed.end());
    return KeyPair{owner, secret, secret, std::move(self)};
}

Bytes HmacScheme::sign(const KeyPair& key, ByteView message) const
{
    ensure_sodium();
    if (key.secretKey.size() != crypto_auth_hmacsha256_KEYBYTES)
        fail(Errc::Malformed, "hmac key has wrong length");
    Bytes mac(crypto_auth_hmacsha256_BYTES);
    crypto_auth_hmacsha256(mac.data(), message.data(), message.size(), key.secretKey.data());
    return mac;
}

bool HmacScheme::verify(ByteView publicKey, ByteView message, ByteView signature) const
{
    ensure_sodium();
    if (publicKey.size() != crypto_auth_hmacsha256_KEYBYTES || signature.size() != crypto_auth_hmacsha256_BYTES)
        return false;
    return crypto_auth_hmacsha256_verify(signature.data(), message.data(), message.size(), publicKey.data()) == 0;
}

std::shared_ptr<const SignatureScheme> make_scheme(std::string_view name)
{
    if (name == "ed25519")
        return std::make_shared<Ed25519Scheme>();
    if (name == "hmac-sha256")
        return std::make_shared<HmacScheme>();
    fail(Errc::InvalidScenario, "unknown signature scheme '" + std::string(name) + "'");
}

KeyPair generate_key(const std::shared_ptr<const SignatureScheme>& scheme, const PartyId& owner,
                     std::uint64_t seed)
{
    std::string material = "hybridpay-key/" + std::to_string(seed) + "/" + owner.name;
    return scheme->derive(owner, sha256(material), scheme);
}

void KeyDirectory::add(const PartyId& party, Bytes publicKey)
{
    entries_.insert_or_assign(party.name, Entry{party, std::move(publicKey)});
}

std::optional<PartyId> KeyDirectory::party(std::string_view name) const
{
    auto it = entries_.find(name);
    if (it == entries_.end())
        return std::nullopt;
    return it->second.party;
}

bool KeyDirectory::verify(const PartyId& signer, ByteView message, ByteView signature) const
{
    auto it = entries_.find(signer.name);
    if (it == entries_.end() || it->second.party != signer)
        return false;
    return scheme_->verify(it->second.publicKey, message, signature);
}

} // namespace hybridpay

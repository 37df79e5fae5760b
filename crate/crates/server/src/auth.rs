//! Bearer token verification.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use phylodb_core::domain::{Role, User};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuthError {
    #[error("missing bearer token")]
    Missing,
    #[error("malformed token")]
    Malformed,
    #[error("invalid token signature")]
    BadSignature,
    #[error("token expired")]
    Expired,
}

/// Resolves a bearer token to a user. Implement this to plug in an external
/// identity provider.
pub trait TokenVerifier: Send + Sync {
    fn verify(&self, token: &str) -> Result<User, AuthError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub sub: String,
    pub role: Role,
    /// Expiry, seconds since the Unix epoch.
    pub exp: i64,
}

/// Local provider: `base64url(claims) "." base64url(HMAC-SHA256(payload))`.
#[derive(Clone)]
pub struct HmacTokens {
    secret: Vec<u8>,
}

impl HmacTokens {
    pub fn new(secret: impl AsRef<[u8]>) -> Self {
        Self {
            secret: secret.as_ref().to_vec(),
        }
    }

    fn mac(&self) -> Hmac<Sha256> {
        Hmac::<Sha256>::new_from_slice(&self.secret).expect("HMAC accepts any key length")
    }

    pub fn sign(&self, claims: &Claims) -> String {
        let payload = URL_SAFE_NO_PAD.encode(serde_json::to_vec(claims).expect("claims serialize"));
        let mut mac = self.mac();
        mac.update(payload.as_bytes());
        let sig = URL_SAFE_NO_PAD.encode(mac.finalize().into_bytes());
        format!("{payload}.{sig}")
    }

    /// Token for `sub` valid for `ttl_secs` from now.
    pub fn mint(&self, sub: &str, role: Role, ttl_secs: i64) -> String {
        self.sign(&Claims {
            sub: sub.to_owned(),
            role,
            exp: chrono::Utc::now().timestamp() + ttl_secs,
        })
    }
}

impl TokenVerifier for HmacTokens {
    fn verify(&self, token: &str) -> Result<User, AuthError> {
        let (payload, sig) = token.split_once('.').ok_or(AuthError::Malformed)?;
        let sig = URL_SAFE_NO_PAD.decode(sig).map_err(|_| AuthError::Malformed)?;
        let mut mac = self.mac();
        mac.update(payload.as_bytes());
        mac.verify_slice(&sig).map_err(|_| AuthError::BadSignature)?;
        let bytes = URL_SAFE_NO_PAD.decode(payload).map_err(|_| AuthError::Malformed)?;
        let claims: Claims = serde_json::from_slice(&bytes).map_err(|_| AuthError::Malformed)?;
        if claims.exp <= chrono::Utc::now().timestamp() {
            return Err(AuthError::Expired);
        }
        if claims.sub.is_empty() {
            return Err(AuthError::Malformed);
        }
        Ok(User::new(claims.sub, claims.role))
    }
}

/// Adapter for an external identity provider. `resolve` maps a token to a
/// user, typically by calling the provider's introspection endpoint; `None`
/// rejects the token.
pub struct RemoteVerifier<F> {
    resolve: F,
}

impl<F> RemoteVerifier<F>
where
    F: Fn(&str) -> Option<User> + Send + Sync,
{
    pub fn new(resolve: F) -> Self {
        Self { resolve }
    }
}

impl<F> TokenVerifier for RemoteVerifier<F>
where
    F: Fn(&str) -> Option<User> + Send + Sync,
{
    fn verify(&self, token: &str) -> Result<User, AuthError> {
        (self.resolve)(token).ok_or(AuthError::BadSignature)
    }
}

/// Extracts the token from an `Authorization` header value.
pub fn bearer(header: Option<&str>) -> Result<&str, AuthError> {
    let value = header.ok_or(AuthError::Missing)?;
    let (scheme, token) = value.split_once(' ').ok_or(AuthError::Missing)?;
    if !scheme.eq_ignore_ascii_case("bearer") || token.trim().is_empty() {
        return Err(AuthError::Missing);
    }
    Ok(token.trim())
}

// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Bank-side semantics of the ATM problem.
//!
//! A [`Ledger`] executes [`Request`]s and answers each successful one with a
//! [`Summary`]. Both the bank and the atm print the summary as a single JSON
//! line, and that line is what differential judging compares, so its
//! rendering is fixed byte for byte:
//!
//! ```text
//! {"account":"alice","initial_balance":100.00}
//! {"account":"alice","deposit":20.00}
//! {"account":"alice","withdraw":40.00}
//! {"account":"alice","balance":80.00}
//! ```

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;

use crate::currency::Amount;

/// Length in bytes of the random secret stored in a card file.
pub const CARD_SECRET_LEN: usize = 32;

/// Longest permitted account name.
pub const MAX_ACCOUNT_NAME_LEN: usize = 122;

/// Smallest balance an account may be opened with.
pub const MIN_INITIAL_BALANCE: Amount = Amount::from_whole(10);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BankError {
    #[error("invalid account name")]
    BadAccountName,
    #[error("account already exists")]
    AccountExists,
    #[error("no such account")]
    UnknownAccount,
    #[error("card does not match account")]
    WrongCard,
    #[error("insufficient funds")]
    InsufficientFunds,
    #[error("amount not permitted for this operation")]
    BadAmount,
    #[error("malformed card secret")]
    BadCard,
}

/// Account names are 1 to 122 characters of `[_\-.0-9a-z]`, excluding the
/// path components `.` and `..`.
pub fn validate_account_name(name: &str) -> Result<(), BankError> {
    let ok_len = (1..=MAX_ACCOUNT_NAME_LEN).contains(&name.len());
    let ok_chars = name
        .bytes()
        .all(|b| matches!(b, b'_' | b'-' | b'.' | b'0'..=b'9' | b'a'..=b'z'));
    if ok_len && ok_chars && name != "." && name != ".." {
        Ok(())
    } else {
        Err(BankError::BadAccountName)
    }
}

/// The secret bound to an account at creation.
#[derive(Clone, PartialEq, Eq)]
pub struct CardSecret([u8; CARD_SECRET_LEN]);

impl CardSecret {
    pub fn from_bytes(bytes: [u8; CARD_SECRET_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; CARD_SECRET_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, BankError> {
        let mut out = [0u8; CARD_SECRET_LEN];
        hex::decode_to_slice(s.trim(), &mut out).map_err(|_| BankError::BadCard)?;
        Ok(Self(out))
    }

    fn matches(&self, other: &CardSecret) -> bool {
        self.0.ct_eq(&other.0).into()
    }
}

impl fmt::Debug for CardSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CardSecret(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Create,
    Deposit,
    Withdraw,
    GetBalance,
}

/// An authenticated client request as the bank sees it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub op: Operation,
    pub account: String,
    pub card: CardSecret,
    /// Initial balance for create, the moved amount for deposit and withdraw.
    pub amount: Option<Amount>,
}

/// The record of one successful operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Summary {
    Created { account: String, initial: Amount },
    Deposited { account: String, amount: Amount },
    Withdrew { account: String, amount: Amount },
    Balance { account: String, balance: Amount },
}

impl Summary {
    pub fn account(&self) -> &str {
        match self {
            Summary::Created { account, .. }
            | Summary::Deposited { account, .. }
            | Summary::Withdrew { account, .. }
            | Summary::Balance { account, .. } => account,
        }
    }

    fn key_and_amount(&self) -> (&'static str, Amount) {
        match self {
            Summary::Created { initial, .. } => ("initial_balance", *initial),
            Summary::Deposited { amount, .. } => ("deposit", *amount),
            Summary::Withdrew { amount, .. } => ("withdraw", *amount),
            Summary::Balance { balance, .. } => ("balance", *balance),
        }
    }

    /// Parses a line produced by [`Summary`]'s `Display` impl; nothing else
    /// is accepted.
    pub fn parse(line: &str) -> Option<Summary> {
        let rest = line.strip_prefix("{\"account\":\"")?;
        let (account, rest) = rest.split_once("\",\"")?;
        validate_account_name(account).ok()?;
        let (key, rest) = rest.split_once("\":")?;
        let amount: Amount = rest.strip_suffix('}')?.parse().ok()?;
        let account = String::from(account);
        Some(match key {
            "initial_balance" => Summary::Created { account, initial: amount },
            "deposit" => Summary::Deposited { account, amount },
            "withdraw" => Summary::Withdrew { account, amount },
            "balance" => Summary::Balance { account, balance: amount },
            _ => return None,
        })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (key, amount) = self.key_and_amount();
        write!(f, "{{\"account\":\"{}\",\"{key}\":{amount}}}", self.account())
    }
}

#[derive(Debug, Clone)]
struct Account {
    balance: Amount,
    card: CardSecret,
}

/// All accounts of one bank run.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    accounts: BTreeMap<String, Account>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Executes one request atomically: on error nothing changes.
    pub fn execute(&mut self, req: &Request) -> Result<Summary, BankError> {
        validate_account_name(&req.account)?;
        let account = req.account.clone();
        if req.op == Operation::Create {
            let initial = req.amount.ok_or(BankError::BadAmount)?;
            if initial < MIN_INITIAL_BALANCE {
                return Err(BankError::BadAmount);
            }
            if self.accounts.contains_key(&req.account) {
                return Err(BankError::AccountExists);
            }
            self.accounts.insert(
                account.clone(),
                Account {
                    balance: initial,
                    card: req.card.clone(),
                },
            );
            return Ok(Summary::Created { account, initial });
        }

        let acct = self.accounts.get_mut(&req.account).ok_or(BankError::UnknownAccount)?;
        if !acct.card.matches(&req.card) {
            return Err(BankError::WrongCard);
        }
        match req.op {
            Operation::Create => unreachable!(),
            Operation::Deposit => {
                let amount = positive(req.amount)?;
                acct.balance = acct.balance.checked_add(amount).ok_or(BankError::BadAmount)?;
                Ok(Summary::Deposited { account, amount })
            }
            Operation::Withdraw => {
                let amount = positive(req.amount)?;
                acct.balance = acct
                    .balance
                    .checked_sub(amount)
                    .ok_or(BankError::InsufficientFunds)?;
                Ok(Summary::Withdrew { account, amount })
            }
            Operation::GetBalance => {
                if req.amount.is_some() {
                    return Err(BankError::BadAmount);
                }
                Ok(Summary::Balance {
                    account,
                    balance: acct.balance,
                })
            }
        }
    }

    pub fn balance(&self, account: &str) -> Option<Amount> {
        self.accounts.get(account).map(|a| a.balance)
    }

    pub fn balances(&self) -> BTreeMap<String, Amount> {
        self.accounts.iter().map(|(k, v)| (k.clone(), v.balance)).collect()
    }
}

fn positive(amount: Option<Amount>) -> Result<Amount, BankError> {
    match amount {
        Some(a) if a > Amount::ZERO => Ok(a),
        _ => Err(BankError::BadAmount),
    }
}

/// Reconstructs final balances from a bank's printed summary lines.
///
/// Lines that are not summaries are ignored. Withdrawals that would go
/// negative saturate at zero, since a target's printout is not trusted to be
/// consistent.
pub fn balances_from_summaries<'a>(lines: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, Amount> {
    let mut balances: BTreeMap<String, Amount> = BTreeMap::new();
    for line in lines {
        let Some(summary) = Summary::parse(line.trim_end_matches(['\r', '\n'])) else {
            continue;
        };
        match summary {
            Summary::Created { account, initial } => {
                balances.insert(account, initial);
            }
            Summary::Deposited { account, amount } => {
                let b = balances.entry(account).or_default();
                *b = b.checked_add(amount).unwrap_or(Amount::MAX);
            }
            Summary::Withdrew { account, amount } => {
                let b = balances.entry(account).or_default();
                *b = b.checked_sub(amount).unwrap_or(Amount::ZERO);
            }
            Summary::Balance { .. } => {}
        }
    }
    balances
}

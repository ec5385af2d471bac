"""Processing functions used by the bundled models."""

from __future__ import annotations

from typing import Dict

from ..fns import (ProcessingFn, assign, builtin_fns, compare_with, draw_into, recall,
                   register_fn, remember, step_store, wrap_payload, xor_encrypt)


def seal(store: str) -> ProcessingFn:
    """Encrypt the payload with the visible ``key`` and keep the result in ``store``."""
    def fn(payload, stores, rng):
        sealed, _ = xor_encrypt(payload, stores, rng)
        return sealed, {store: sealed}
    return fn


def corpus_fns() -> Dict[str, ProcessingFn]:
    reg: Dict[str, ProcessingFn] = {}
    for name, fn in [
        # queue
        ("incr_rear", step_store("rear", "n")),
        ("incr_front", step_store("front", "n")),
        ("block", assign("blocked", True)),
        ("unblock", assign("blocked", False)),
        ("set_busy", assign("busy", True)),
        ("set_idle", assign("busy", False)),
        # authentication models
        ("remember_key", remember("key", field="key", strip=True)),
        ("gen_nonce", draw_into("nonce")),
        ("recall_nonce", recall("nonce")),
        ("keep_reference", remember("reference")),
        ("compare_reference", compare_with("reference")),
        ("seal_template", seal("template")),
        ("recall_template", recall("template")),
        ("gen_otp", draw_into("otp")),
        ("recall_otp", recall("otp")),
        ("embed_sms", wrap_payload("otp")),
    ]:
        register_fn(reg, name, fn)
    return reg


def default_registry() -> Dict[str, ProcessingFn]:
    """Builtins plus the corpus functions."""
    reg = builtin_fns()
    for name, fn in corpus_fns().items():
        register_fn(reg, name, fn)
    return reg

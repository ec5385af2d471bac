"""Processing functions for create and process stages.

A processing function has the signature ``fn(payload, stores, rng) ->
(new_payload, store_updates)``.  ``stores`` is a read-only view in which bare
names resolve within the owning machine (then outward, then model-wide) and
qualified names (``Queue.rear``) address any store.  ``store_updates`` maps
store names of the *owning* machine to new values; the simulator applies them
atomically after the function returns.  ``rng`` is the run's seeded
``random.Random``; functions must not use any other source of randomness.

Operands of the builtins are looked up in the payload record first and fall
back to a store of the same name, so ``xor_encrypt`` on an int payload uses the
owning machine's ``key`` store.
"""

from __future__ import annotations

import random
from typing import Any, Callable, Dict, Mapping, MutableMapping, Tuple

from .diagnostics import SimError

ProcessingFn = Callable[[Any, Mapping[str, Any], random.Random], Tuple[Any, Dict[str, Any]]]

OTP_RANGE = (100000, 1000000)


def register_fn(registry: MutableMapping[str, ProcessingFn], name: str, function: ProcessingFn):
    if name in registry:
        raise SimError("E-FN-DUP", f"function '{name}' is already registered")
    registry[name] = function
    return function


def _operand(name: str, payload: Any, stores: Mapping[str, Any]):
    if isinstance(payload, dict) and name in payload:
        return payload[name]
    try:
        return stores[name]
    except KeyError:
        raise SimError("E-FN-ERROR", f"no operand '{name}' in payload or stores") from None


def _int(value, what):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SimError("E-FN-ERROR", f"{what} must be an int, got {value!r}")
    return value


def identity(payload, stores, rng):
    return payload, {}


def _mod_step(delta):
    def fn(payload, stores, rng):
        value = _int(payload if isinstance(payload, int) and not isinstance(payload, bool)
                     else _operand("value", payload, stores), "value")
        n = _int(_operand("n", payload, stores), "n")
        if n <= 0:
            raise SimError("E-FN-ERROR", f"modulus must be positive, got {n}")
        new = (value + delta) % n
        if isinstance(payload, dict):
            return {**payload, "value": new}, {}
        return new, {}
    return fn


incr_mod = _mod_step(+1)
incr_mod.__doc__ = "``value := (value + 1) mod n``; operands from the payload record or stores."
decr_mod = _mod_step(-1)
decr_mod.__doc__ = "``value := (value - 1) mod n``; result always in ``[0, n)``."


def compare_eq(payload, stores, rng):
    """``{a, b}`` -> ``{result: a == b}`` (same type and value)."""
    a = _operand("a", payload, stores)
    b = _operand("b", payload, stores)
    return {"result": type(a) is type(b) and a == b}, {}


def _xor(data, key):
    key = _int(key, "key")
    if isinstance(data, bool):
        raise SimError("E-FN-ERROR", "cannot xor a bool")
    if isinstance(data, int):
        return data ^ key
    if isinstance(data, str):
        # low 7 bits only, so ASCII stays ASCII and no surrogates appear
        k = key & 0x7F
        return "".join(chr(ord(c) ^ k) for c in data)
    raise SimError("E-FN-ERROR", f"cannot xor {data!r}")


def xor_encrypt(payload, stores, rng):
    """Toy cipher: payload (or its ``data`` field) XOR ``key``.  Its own inverse."""
    key = _operand("key", payload, stores)
    if isinstance(payload, dict):
        if "data" not in payload:
            raise SimError("E-FN-ERROR", "record payload needs a 'data' field")
        return {**payload, "data": _xor(payload["data"], key)}, {}
    return _xor(payload, key), {}


def xor_decrypt(payload, stores, rng):
    return xor_encrypt(payload, stores, rng)


def gen_random_int(payload, stores, rng):
    """A six-digit integer drawn from the run's seeded generator."""
    return rng.randrange(*OTP_RANGE), {}


def extract_field(payload, stores, rng):
    """Pull one field out of a record payload.

    The field is named by a ``field`` store when one is visible; otherwise the
    record must have exactly one field.
    """
    if not isinstance(payload, dict):
        raise SimError("E-FN-ERROR", f"extract_field needs a record payload, got {payload!r}")
    try:
        name = stores["field"]
    except KeyError:
        if len(payload) != 1:
            raise SimError("E-FN-ERROR", "no 'field' store and payload has several fields") from None
        (name,) = payload
    if name not in payload:
        raise SimError("E-FN-ERROR", f"payload has no field '{name}'")
    return payload[name], {}


def builtin_fns() -> Dict[str, ProcessingFn]:
    reg: Dict[str, ProcessingFn] = {}
    for name, fn in [
        ("identity", identity),
        ("incr_mod", incr_mod),
        ("decr_mod", decr_mod),
        ("compare_eq", compare_eq),
        ("xor_encrypt", xor_encrypt),
        ("xor_decrypt", xor_decrypt),
        ("gen_random_int", gen_random_int),
        ("extract_field", extract_field),
    ]:
        register_fn(reg, name, fn)
    return reg


# --- factories for model-specific functions ---------------------------------

def step_store(store: str, modulus: str, delta: int = 1) -> ProcessingFn:
    """``store := (store + delta) mod modulus``; the payload passes through."""
    def fn(payload, stores, rng):
        n = _int(stores[modulus], modulus)
        if n <= 0:
            raise SimError("E-FN-ERROR", f"modulus {modulus} must be positive")
        return payload, {store: (_int(stores[store], store) + delta) % n}
    return fn


def assign(store: str, value: Any) -> ProcessingFn:
    def fn(payload, stores, rng):
        return payload, {store: value}
    return fn


def remember(store: str, field: str = None, strip: bool = False) -> ProcessingFn:
    """Copy the payload (or one of its fields) into ``store``.

    With ``strip`` the field is removed from the payload that flows on.
    """
    def fn(payload, stores, rng):
        if field is None:
            return payload, {store: payload}
        if not isinstance(payload, dict) or field not in payload:
            raise SimError("E-FN-ERROR", f"payload has no field '{field}'")
        rest = {k: v for k, v in payload.items() if k != field} if strip else payload
        return rest, {store: payload[field]}
    return fn


def recall(store: str) -> ProcessingFn:
    """The new payload is the current value of ``store``."""
    def fn(payload, stores, rng):
        return stores[store], {}
    return fn


def compare_with(store: str) -> ProcessingFn:
    """``{result: payload == store}`` via :func:`compare_eq`."""
    def fn(payload, stores, rng):
        return compare_eq({"a": payload, "b": stores[store]}, stores, rng)
    return fn


def draw_into(store: str, base: ProcessingFn = gen_random_int) -> ProcessingFn:
    """Run ``base`` and also keep its result in ``store``."""
    def fn(payload, stores, rng):
        value, updates = base(payload, stores, rng)
        return value, {**updates, store: value}
    return fn


def wrap_payload(field: str) -> ProcessingFn:
    def fn(payload, stores, rng):
        return {field: payload}, {}
    return fn

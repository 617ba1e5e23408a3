"""Independent RV32I reference decoder and ALU, used only as a test oracle.

Deliberately written against the ISA encoding listings as a flat
(mask, match) table with per-format immediate extractors, so it shares no
structure or code with the package's decoder. Keep it that way: the value of
the cross-check comes from the independence.
"""


def _sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    if value & (1 << (bits - 1)):
        value -= 1 << bits
    return value


def _imm_i(w):
    return _sext(w >> 20, 12)


def _imm_s(w):
    return _sext(((w >> 25) << 5) | ((w >> 7) & 0x1F), 12)


def _imm_b(w):
    imm = (
        (((w >> 31) & 1) << 12)
        | (((w >> 7) & 1) << 11)
        | (((w >> 25) & 0x3F) << 5)
        | (((w >> 8) & 0xF) << 1)
    )
    return _sext(imm, 13)


def _imm_u(w):
    return _sext(w & 0xFFFFF000, 32)


def _imm_j(w):
    imm = (
        (((w >> 31) & 1) << 20)
        | (((w >> 12) & 0xFF) << 12)
        | (((w >> 20) & 1) << 11)
        | (((w >> 21) & 0x3FF) << 1)
    )
    return _sext(imm, 21)


def _rd(w):
    return (w >> 7) & 0x1F


def _rs1(w):
    return (w >> 15) & 0x1F


def _rs2(w):
    return (w >> 20) & 0x1F


# One row per instruction: (mask, match, mnemonic, format).
# Transcribed from the base-ISA opcode listing, RV32I + CSR ops only.
_TABLE = [
    (0x0000007F, 0x00000037, "lui", "U"),
    (0x0000007F, 0x00000017, "auipc", "U"),
    (0x0000007F, 0x0000006F, "jal", "J"),
    (0x0000707F, 0x00000067, "jalr", "I"),
    (0x0000707F, 0x00000063, "beq", "B"),
    (0x0000707F, 0x00001063, "bne", "B"),
    (0x0000707F, 0x00004063, "blt", "B"),
    (0x0000707F, 0x00005063, "bge", "B"),
    (0x0000707F, 0x00006063, "bltu", "B"),
    (0x0000707F, 0x00007063, "bgeu", "B"),
    (0x0000707F, 0x00000003, "lb", "I"),
    (0x0000707F, 0x00001003, "lh", "I"),
    (0x0000707F, 0x00002003, "lw", "I"),
    (0x0000707F, 0x00004003, "lbu", "I"),
    (0x0000707F, 0x00005003, "lhu", "I"),
    (0x0000707F, 0x00000023, "sb", "S"),
    (0x0000707F, 0x00001023, "sh", "S"),
    (0x0000707F, 0x00002023, "sw", "S"),
    (0x0000707F, 0x00000013, "addi", "I"),
    (0x0000707F, 0x00002013, "slti", "I"),
    (0x0000707F, 0x00003013, "sltiu", "I"),
    (0x0000707F, 0x00004013, "xori", "I"),
    (0x0000707F, 0x00006013, "ori", "I"),
    (0x0000707F, 0x00007013, "andi", "I"),
    (0xFE00707F, 0x00001013, "slli", "Ishift"),
    (0xFE00707F, 0x00005013, "srli", "Ishift"),
    (0xFE00707F, 0x40005013, "srai", "Ishift"),
    (0xFE00707F, 0x00000033, "add", "R"),
    (0xFE00707F, 0x40000033, "sub", "R"),
    (0xFE00707F, 0x00001033, "sll", "R"),
    (0xFE00707F, 0x00002033, "slt", "R"),
    (0xFE00707F, 0x00003033, "sltu", "R"),
    (0xFE00707F, 0x00004033, "xor", "R"),
    (0xFE00707F, 0x00005033, "srl", "R"),
    (0xFE00707F, 0x40005033, "sra", "R"),
    (0xFE00707F, 0x00006033, "or", "R"),
    (0xFE00707F, 0x00007033, "and", "R"),
    (0x0000707F, 0x0000000F, "fence", "FENCE"),
    (0xFFFFFFFF, 0x00000073, "ecall", "NONE"),
    (0xFFFFFFFF, 0x00100073, "ebreak", "NONE"),
    (0x0000707F, 0x00001073, "csrrw", "CSR"),
    (0x0000707F, 0x00002073, "csrrs", "CSR"),
    (0x0000707F, 0x00003073, "csrrc", "CSR"),
    (0x0000707F, 0x00005073, "csrrwi", "CSRI"),
    (0x0000707F, 0x00006073, "csrrsi", "CSRI"),
    (0x0000707F, 0x00007073, "csrrci", "CSRI"),
]


def decode(word: int):
    """Decode a 32-bit word to (mnemonic, operands dict), or None if invalid."""
    word &= 0xFFFFFFFF
    for mask, match, name, fmt in _TABLE:
        if word & mask != match:
            continue
        if fmt == "R":
            return name, {"rd": _rd(word), "rs1": _rs1(word), "rs2": _rs2(word)}
        if fmt == "I":
            return name, {"rd": _rd(word), "rs1": _rs1(word), "imm": _imm_i(word)}
        if fmt == "Ishift":
            return name, {"rd": _rd(word), "rs1": _rs1(word), "imm": _rs2(word)}
        if fmt == "S":
            return name, {"rs1": _rs1(word), "rs2": _rs2(word), "imm": _imm_s(word)}
        if fmt == "B":
            return name, {"rs1": _rs1(word), "rs2": _rs2(word), "imm": _imm_b(word)}
        if fmt == "U":
            return name, {"rd": _rd(word), "imm": _imm_u(word)}
        if fmt == "J":
            return name, {"rd": _rd(word), "imm": _imm_j(word)}
        if fmt == "FENCE":
            return name, {"rd": _rd(word), "rs1": _rs1(word)}
        if fmt == "NONE":
            return name, {}
        if fmt == "CSR":
            return name, {"rd": _rd(word), "rs1": _rs1(word), "csr": word >> 20}
        if fmt == "CSRI":
            return name, {"rd": _rd(word), "zimm": _rs1(word), "csr": word >> 20}
    return None


_M32 = 0xFFFFFFFF


def _s32(x):
    return _sext(x, 32)


def alu(mnemonic: int, a: int, b: int) -> int:
    """Reference result of a register/immediate ALU op on unsigned 32-bit inputs.

    For the *i variants pass the immediate as b. Shift amounts are taken
    modulo 32, matching the 5-bit hardware field.
    """
    a &= _M32
    b &= _M32
    sh = b & 31
    results = {
        "add": (a + b) & _M32,
        "addi": (a + b) & _M32,
        "sub": (a - b) & _M32,
        "xor": a ^ b,
        "xori": a ^ b,
        "or": a | b,
        "ori": a | b,
        "and": a & b,
        "andi": a & b,
        "sll": (a << sh) & _M32,
        "slli": (a << sh) & _M32,
        "srl": a >> sh,
        "srli": a >> sh,
        "sra": (_s32(a) >> sh) & _M32,
        "srai": (_s32(a) >> sh) & _M32,
        "slt": 1 if _s32(a) < _s32(b) else 0,
        "slti": 1 if _s32(a) < _s32(b) else 0,
        "sltu": 1 if a < b else 0,
        "sltiu": 1 if a < b else 0,
    }
    return results[mnemonic]


def branch_taken(mnemonic: str, a: int, b: int) -> bool:
    a &= _M32
    b &= _M32
    return {
        "beq": a == b,
        "bne": a != b,
        "blt": _s32(a) < _s32(b),
        "bge": _s32(a) >= _s32(b),
        "bltu": a < b,
        "bgeu": a >= b,
    }[mnemonic]

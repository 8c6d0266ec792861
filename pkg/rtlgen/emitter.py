"""
Structural Verilog-2001 for acyclic and cyclic arbiter, ring-oscillator and
butterfly PUFs.

The text fixes structure only: symmetric switch paths, inverter rings,
latches and the registered feedback loop. Path delays come from the fabric
the design is placed on, so simulating the emitted RTL is not expected to
reproduce the toolkit's responses.

Arrays map onto ports MSB-first: array index ``i`` of an ``n_c``-bit challenge
drives ``challenge[n_c-1-i]``, so a bit string reads the same in Python and in
``$display("%b")``.
"""

import logging
import re
from dataclasses import dataclass, field

from feedpuf.exceptions import ConfigurationError, UsageError
from pufs.bits import bits_from_string, bits_to_string
from pufs.models import FeedbackConfig, PufCategory

logger = logging.getLogger(__name__)

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
ALIASES = {
    PufCategory.ARBITER.value: "apuf",
    PufCategory.RING_OSCILLATOR.value: "ropuf",
    PufCategory.BUTTERFLY.value: "bpuf",
}
KEEP = '(* dont_touch = "true" *) '


@dataclass(frozen=True)
class RtlConfig:
    category: PufCategory
    challenge_width: int
    response_width: int
    fb: FeedbackConfig = field(default_factory=FeedbackConfig.empty)
    module_name: str = ""
    # dont_touch on every instance of a symmetric path
    dont_touch: bool = False

    def __post_init__(self):
        object.__setattr__(self, "category", PufCategory(self.category))
        if self.challenge_width < 1 or self.response_width < 1:
            raise ConfigurationError("challenge and response widths must be at least 1")
        self.fb.validate_for(self.challenge_width, self.response_width)
        if self.module_name and not IDENTIFIER.match(self.module_name):
            raise ConfigurationError(f"{self.module_name!r} is not a Verilog identifier")

    @property
    def cyclic(self) -> bool:
        return len(self.fb) > 0

    @property
    def name(self) -> str:
        if self.module_name:
            return self.module_name
        prefix = "cyc_" if self.cyclic else ""
        return f"{prefix}{ALIASES[self.category.value]}_{self.challenge_width}x{self.response_width}"


HEADER = """\
// {name}: {label} with a {n_c}-bit challenge and a {n}-bit response
// feedback taps (response:challenge:position): {taps}
`timescale 1ns / 1ps

module {name} (
    input  wire [{c_msb}:0] challenge,
    input  wire enable,
{clock}    output wire [{r_msb}:0] response
);
    wire [{c_msb}:0] eff_challenge;
"""

CLOCK_PORT = "    input  wire clk,\n"

ACYCLIC_CHALLENGE = "    assign eff_challenge = challenge;\n"

FEEDBACK = """\
    wire [{r_msb}:0] response_q;
    feedback_register #(.WIDTH({n})) response_reg (.clk(clk), .enable(enable), .d(response), .q(response_q));
"""

PASS_BIT = "    assign eff_challenge[{bit}] = challenge[{bit}];\n"

FEEDBACK_XOR = "    xor fb_xor_{t} (eff_challenge[{bit}], challenge[{src}], response_q[{resp}]);\n"

SWITCH_STAGE = (
    "    {keep}mux_pair {inst}_{r}_{i} (.sel(eff_challenge[{bit}]), "
    ".top_in({a}_{r}[{i}]), .bot_in({b}_{r}[{i}]), .top_out({a}_{r}[{next}]), .bot_out({b}_{r}[{next}]));\n"
)

ARBITER_BIT = """
    // response[{r}]
    wire [{n_c}:0] top_{r}, bot_{r};
    assign top_{r}[0] = enable;
    assign bot_{r}[0] = enable;
{stages}    arbiter_latch arbiter_{r} (.top(top_{r}[{n_c}]), .bot(bot_{r}[{n_c}]), .out(response[{r}]));
"""

RING_STAGE = "    {keep}ro_stage ring_{ring}_{r}_{i} (.sel(eff_challenge[{bit}]), .in(ring_{ring}_{r}[{i}]), .out(ring_{ring}_{r}[{next}]));\n"

# every ro_stage inverts, so the loop gate inverts only when the stage count is even
LOOP_GATE = ("~(enable & {net})", "enable & {net}")

RING_BIT = """
    // response[{r}]
    wire [{n_c}:0] ring_a_{r}, ring_b_{r};
    wire [15:0] count_a_{r}, count_b_{r};
    assign ring_a_{r}[0] = {gate_a};
    assign ring_b_{r}[0] = {gate_b};
{stages}    ro_counter counter_a_{r} (.osc(ring_a_{r}[{n_c}]), .enable(enable), .count(count_a_{r}));
    ro_counter counter_b_{r} (.osc(ring_b_{r}[{n_c}]), .enable(enable), .count(count_b_{r}));
    assign response[{r}] = count_a_{r} > count_b_{r};
"""

BUTTERFLY_BIT = """
    // response[{r}]
    wire [{n_c}:0] left_{r}, right_{r};
    assign left_{r}[0] = enable;
    assign right_{r}[0] = enable;
{stages}    {keep}butterfly_cell cell_{r} (.excite(enable), .left(left_{r}[{n_c}]), .right(right_{r}[{n_c}]), .out(response[{r}]));
"""

MUX_PAIR = """\
module mux_pair (
    input  wire sel,
    input  wire top_in,
    input  wire bot_in,
    output wire top_out,
    output wire bot_out
);
    assign top_out = sel ? bot_in : top_in;
    assign bot_out = sel ? top_in : bot_in;
endmodule
"""

ARBITER_LATCH = """\
module arbiter_latch (
    input  wire top,
    input  wire bot,
    output reg  out
);
    // the first edge to arrive sets the latch
    always @(top or bot)
        if (top && !bot)
            out <= 1'b1;
        else if (bot && !top)
            out <= 1'b0;
endmodule
"""

RO_STAGE = """\
module ro_stage (
    input  wire sel,
    input  wire in,
    output wire out
);
    wire inv_0, inv_1;
    assign inv_0 = ~in;
    assign inv_1 = ~in;
    assign out = sel ? inv_1 : inv_0;
endmodule
"""

RO_COUNTER = """\
module ro_counter (
    input  wire osc,
    input  wire enable,
    output reg  [15:0] count
);
    always @(posedge osc or negedge enable)
        if (!enable)
            count <= 16'd0;
        else
            count <= count + 16'd1;
endmodule
"""

BUTTERFLY_CELL = """\
module butterfly_cell (
    input  wire excite,
    input  wire left,
    input  wire right,
    output wire out
);
    // cross-coupled pair held unstable by excite; the earlier routed edge decides
    wire q_left, q_right;
    assign q_left = ~((excite & right) | q_right);
    assign q_right = ~((excite & left) | q_left);
    assign out = q_left;
endmodule
"""

FEEDBACK_REGISTER = """\
module feedback_register #(
    parameter WIDTH = 1
) (
    input  wire clk,
    input  wire enable,
    input  wire [WIDTH-1:0] d,
    output reg  [WIDTH-1:0] q
);
    initial q = {WIDTH{1'b0}};
    // cleared while disabled so every held challenge starts from an all-zero response
    always @(posedge clk)
        q <= enable ? d : {WIDTH{1'b0}};
endmodule
"""

CELLS = {
    PufCategory.ARBITER.value: (MUX_PAIR, ARBITER_LATCH),
    PufCategory.RING_OSCILLATOR.value: (RO_STAGE, RO_COUNTER),
    PufCategory.BUTTERFLY.value: (MUX_PAIR, BUTTERFLY_CELL),
}


def _challenge_block(cfg: RtlConfig) -> str:
    if not cfg.cyclic:
        return ACYCLIC_CHALLENGE
    n_c, n = cfg.challenge_width, cfg.response_width
    text = FEEDBACK.format(r_msb=n - 1, n=n)
    by_target = {tap.target_pos: (t, tap) for t, tap in enumerate(cfg.fb.taps)}
    for i in range(n_c):
        bit = n_c - 1 - i
        if i in by_target:
            t, tap = by_target[i]
            text += FEEDBACK_XOR.format(t=t, bit=bit, src=n_c - 1 - tap.ch_idx, resp=n - 1 - tap.resp_idx)
        else:
            text += PASS_BIT.format(bit=bit)
    return text


def _switch_chain(cfg: RtlConfig, r: int, inst: str, a: str, b: str) -> str:
    keep = KEEP if cfg.dont_touch else ""
    n_c = cfg.challenge_width
    return "".join(
        SWITCH_STAGE.format(keep=keep, inst=inst, r=r, i=i, bit=n_c - 1 - i, a=a, b=b, next=i + 1)
        for i in range(n_c)
    )


def _response_bit(cfg: RtlConfig, r: int) -> str:
    n_c = cfg.challenge_width
    keep = KEEP if cfg.dont_touch else ""
    if cfg.category == PufCategory.ARBITER:
        return ARBITER_BIT.format(r=r, n_c=n_c, stages=_switch_chain(cfg, r, "stage", "top", "bot"))
    if cfg.category == PufCategory.BUTTERFLY:
        return BUTTERFLY_BIT.format(r=r, n_c=n_c, keep=keep, stages=_switch_chain(cfg, r, "route", "left", "right"))
    stages = "".join(
        RING_STAGE.format(keep=keep, ring=ring, r=r, i=i, bit=n_c - 1 - i, next=i + 1)
        for ring in ("a", "b")
        for i in range(n_c)
    )
    gate = LOOP_GATE[n_c % 2]
    return RING_BIT.format(
        r=r,
        n_c=n_c,
        stages=stages,
        gate_a=gate.format(net=f"ring_a_{r}[{n_c}]"),
        gate_b=gate.format(net=f"ring_b_{r}[{n_c}]"),
    )


def emit_verilog(cfg: RtlConfig) -> str:
    """Top module first, then every cell module it instantiates, each once."""
    n_c, n = cfg.challenge_width, cfg.response_width
    text = HEADER.format(
        name=cfg.name,
        label=("Cyc" if cfg.cyclic else "") + cfg.category.label,
        n_c=n_c,
        n=n,
        taps=str(cfg.fb) or "none",
        c_msb=n_c - 1,
        r_msb=n - 1,
        clock=CLOCK_PORT if cfg.cyclic else "",
    )
    text += _challenge_block(cfg)
    # response bits in array order, i.e. from the MSB down
    for j in range(n):
        text += _response_bit(cfg, n - 1 - j)
    text += "endmodule\n"

    cells = CELLS[cfg.category.value] + ((FEEDBACK_REGISTER,) if cfg.cyclic else ())
    for cell in cells:
        text += "\n" + cell
    logger.debug("emitted %s: %d taps, %d lines", cfg.name, len(cfg.fb), text.count("\n"))
    return text


TESTBENCH = """\
// testbench for {name}: {count} challenges, {cycles} cycles each
// prints "<challenge> <cycle> <response>" once per cycle
`timescale 1ns / 1ps

module {name}_tb;
    reg  [{c_msb}:0] challenge = {n_c}'b0;
    reg  enable = 1'b0;
    reg  clk = 1'b0;
    wire [{r_msb}:0] response;
    integer cycle;

    {name} dut (
        .challenge(challenge),
        .enable(enable),
{clock}        .response(response)
    );

    always #5 clk = ~clk;

    initial begin
{blocks}        $finish;
    end
endmodule
"""

APPLY = """\
        // challenge {index}
        enable = 1'b0;
        challenge = {n_c}'b{bits};
        @(negedge clk);
        enable = 1'b1;
        for (cycle = 1; cycle <= {cycles}; cycle = cycle + 1) begin
            #1 $display("%b %0d %b", challenge, cycle, response);
            @(negedge clk);
        end
"""


def emit_testbench(cfg: RtlConfig, challenges, cycles: int = 1) -> str:
    """One apply block per challenge; the device is disabled between challenges."""
    if cycles < 1:
        raise UsageError(f"cycles must be at least 1, got {cycles}")
    bits = []
    for challenge in challenges:
        if isinstance(challenge, str):
            challenge = bits_from_string(challenge)
        if len(challenge) != cfg.challenge_width:
            raise UsageError(f"challenge has {len(challenge)} bits, {cfg.name} takes {cfg.challenge_width}")
        bits.append(bits_to_string(challenge))
    n_c = cfg.challenge_width
    blocks = "".join(
        APPLY.format(index=index, n_c=n_c, bits=value, cycles=cycles) for index, value in enumerate(bits, start=1)
    )
    return TESTBENCH.format(
        name=cfg.name,
        count=len(bits),
        cycles=cycles,
        c_msb=n_c - 1,
        r_msb=cfg.response_width - 1,
        n_c=n_c,
        clock="        .clk(clk),\n" if cfg.cyclic else "",
        blocks=blocks,
    )

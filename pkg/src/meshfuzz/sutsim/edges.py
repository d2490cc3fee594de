"""Edge-id map for the simulated target.

Every branch site in the simulator records exactly one of the ids below, so
coverage tests can be written against hand-traced executions. Budget: the
entry component owns ids 0-199; each downstream owns 0-99 in its own channel.
This module is the checked-in reference for what each id means; the
component code records these constants at the matching branch.
"""

# --------------------------------------------------------------------------
# Entry component (channel 0).
# --------------------------------------------------------------------------

E_LOOP = 0                 # one hit per delivered wire message

# TLV parse stage
E_HDR_SHORT = 11           # delivered buffer shorter than the 3-byte header
E_LEN_OVERRUN = 12         # declared length exceeds delivered payload
E_LEN_UNDERRUN = 13        # declared length shorter than delivered (junk tail)
E_LEN_EXACT = 14           # declared length matches delivered payload
E_LEN_HUGE = 15            # declared length above the 4096 cap
E_DISPATCH_REGISTER = 16
E_DISPATCH_SETUP = 17
E_DISPATCH_SERVICE = 18
E_DISPATCH_RESET = 19
E_DISPATCH_UNKNOWN = 20

# REGISTER handling
E_REG_EMPTY = 30           # empty payload
E_REG_TYPE_NORMAL = 31     # reg_type 0x01
E_REG_TYPE_EMERGENCY = 32  # reg_type 0x02
E_REG_TYPE_RESERVED = 33   # reg_type 0x7f (rejected; D1 overread lives here)
E_REG_TYPE_OTHER = 34
E_REG_IDENT_EMPTY = 35
E_REG_IDENT_OK = 36        # identity 1-8 bytes
E_REG_IDENT_LONG = 37      # identity > 8 bytes, truncated
E_REG_NEW = 38             # IDLE -> REGISTERED
E_REG_AGAIN = 39           # re-register in a later phase

# SETUP handling
E_SETUP_IDLE = 50          # setup before registration
E_SETUP_PHASE_OK = 51
E_SETUP_SHORT = 52         # payload shorter than its four fields
E_SETUP_TYPE_IPV4 = 53     # session_type 0x01
E_SETUP_TYPE_IPV6 = 54     # session_type 0x02
E_SETUP_TYPE_ETHER = 55    # session_type 0x03
E_SETUP_TYPE_OTHER = 56
E_SETUP_QUERY_OK = 57      # session-manager round trip succeeded
E_SETUP_QUERY_FAIL = 58    # session manager unreachable / deadline
E_SETUP_INVALID = 59       # request validation failed

# error-handling path: session manager not active
E_PATH2 = 60
E_PATH2_INACTIVE = 61      # manager reported INACTIVE (D2 crash site)
E_PATH2_UNAVAILABLE = 62
E_PATH2_OTHER = 63

# corner-case path: limited discovery + ethernet type + partial config
E_PATH3 = 70               # D3 crash site
E_PATH3_HANDLED = 71       # specialized handling when D3 is disabled

# standard path
E_PATH1 = 80
E_PATH1_ACTIVATED = 81     # REGISTERED -> SESSION_ACTIVE
E_PATH1_REACTIVATED = 82   # setup while already active

E_DEFAULT_CASE = 90        # invalid request, no special condition held

# SERVICE_REQUEST handling
E_SVC_IDLE = 100
E_SVC_SHORT = 101
E_SVC_DISCOVERY = 102      # kind 0x01 -> registry
E_SVC_CONFIG = 103         # kind 0x02 -> config store
E_SVC_KEEPALIVE = 104      # kind 0x03, local only
E_SVC_OTHER = 105
E_SVC_B_FAIL = 106         # registry unreachable
E_SVC_C_FAIL = 107         # config store unreachable

# session reset
E_RESET = 120
E_RESET_FANOUT_FAIL = 121  # some downstream reset did not get through

ENTRY_MAX_EDGE = 199

PATH1_EDGES = frozenset({E_PATH1, E_PATH1_ACTIVATED, E_PATH1_REACTIVATED})
PATH2_EDGES = frozenset({E_PATH2, E_PATH2_INACTIVE, E_PATH2_UNAVAILABLE, E_PATH2_OTHER})
PATH3_EDGES = frozenset({E_PATH3, E_PATH3_HANDLED})

# --------------------------------------------------------------------------
# Session manager (downstream A, channel 1).
# --------------------------------------------------------------------------

A_LOOP = 0
A_HDR_SHORT = 1
A_UNKNOWN_TYPE = 2

A_QUERY_HANDLED = 10
A_QUERY_SHORT = 11         # padded with defaults
A_TYPE_IPV4 = 12
A_TYPE_IPV6 = 13
A_TYPE_ETHER = 14
A_TYPE_OTHER = 15
A_HINT_HI_ZERO = 20
A_HINT_HI_SET = 21
A_HINT_LO_ZERO = 22        # classes below apply when the high byte is zero
A_HINT_LO_LOW = 23         # 0x01-0x7f
A_HINT_LO_MID = 24         # 0x80-0xdf
A_HINT_LO_ECLASS = 25      # 0xe0-0xef
A_HINT_LO_EXACT = 26       # exactly 0xee
A_HINT_LO_HIGH = 27        # 0xf0-0xff
A_QOS_ZERO = 30
A_QOS_LOW = 31             # 0x01-0x2f
A_QOS_MCLASS = 32          # 0x30-0x3f
A_QOS_MID = 33             # 0x40-0x7f
A_QOS_HIGH = 34            # 0x80-0xff
A_DEGRADE_ENTER = 40       # hint 0x00ee first seen this session
A_DEGRADE_AGAIN = 41       # query while already degraded
A_REPLY_ACTIVE = 45
A_REPLY_INACTIVE = 46

# degraded-context branches: the entry forwards its discovery/config flags,
# and the manager validates more strictly once both report degraded states
A_CTX = 50                 # query while discovery LIMITED and config PARTIAL
A_CTX_TYPE_IPV4 = 51
A_CTX_TYPE_IPV6 = 52
A_CTX_TYPE_ETHER = 53
A_CTX_TYPE_OTHER = 54

A_RESET_EDGE = 60

A_MAX_EDGE = 99

# --------------------------------------------------------------------------
# Registry (downstream B, channel 2).
# --------------------------------------------------------------------------

B_LOOP = 0
B_HDR_SHORT = 1
B_UNKNOWN_TYPE = 2

B_DISCOVER_HANDLED = 10
B_DISCOVER_EMPTY = 11      # missing mode byte, default 0
B_MODE_ZERO = 12
B_MODE_ONE = 13
B_MODE_LIMITED = 14        # discovery mode 0x02 -> limited discovery
B_MODE_SMALL = 15          # 0x03-0x0f
B_MODE_MID = 16            # 0x10-0x7f
B_MODE_HIGH = 17           # 0x80-0xff
B_LIMITED_ENTER = 20
B_LIMITED_AGAIN = 21
B_REPLY_FULL = 25
B_REPLY_LIMITED = 26

B_RESET_EDGE = 30

B_MAX_EDGE = 99

# --------------------------------------------------------------------------
# Config store (downstream C, channel 3).
# --------------------------------------------------------------------------

C_LOOP = 0
C_HDR_SHORT = 1
C_UNKNOWN_TYPE = 2

C_CONFIGURE_HANDLED = 10
C_CONFIGURE_EMPTY = 11
C_MODE_ZERO = 12
C_MODE_PARTIAL = 13        # config mode 0x01 -> partial configuration
C_MODE_SMALL = 14          # 0x02-0x0f
C_MODE_MID = 15            # 0x10-0x7f
C_MODE_HIGH = 16           # 0x80-0xff
C_PARTIAL_ENTER = 20
C_PARTIAL_AGAIN = 21
C_CTX_LIMITED = 22         # partial config requested while discovery LIMITED
C_REPLY_COMPLETE = 25
C_REPLY_PARTIAL = 26

C_RESET_EDGE = 30

C_MAX_EDGE = 99

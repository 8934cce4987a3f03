"""The eight-role reaction scheme and the slot kind each role's argument takes."""

PRODUCT = "product"
REACTANT = "reactant"
CATALYST = "catalyst"
SOLVENT = "solvent"
TEMPERATURE = "temperature"
TIME = "time"
REACTION_TYPE = "reaction_type"
YIELD = "yield"

ROLES: tuple[str, ...] = (
    PRODUCT,
    REACTANT,
    CATALYST,
    SOLVENT,
    TEMPERATURE,
    TIME,
    REACTION_TYPE,
    YIELD,
)

# Roles whose argument is a chemical mention vs. a numeric mention.
CHEM_ARG_ROLES = frozenset({PRODUCT, REACTANT, CATALYST, SOLVENT})
NUM_ARG_ROLES = frozenset({TEMPERATURE, TIME, YIELD})

# Roles built from patent-style structured records.
KNOWLEDGE_ROLES: tuple[str, ...] = (PRODUCT, REACTANT, CATALYST, SOLVENT)

# Roles for which the pattern bootstrap runs by default.
DEFAULT_LINGUISTIC_ROLES = frozenset({PRODUCT, YIELD, TEMPERATURE, TIME})


def role_index(role: str) -> int:
    return ROLES.index(role)

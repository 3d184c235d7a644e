"""Parsing of the small arithmetic grammar used for custom perturbations."""

import io
import tokenize
from dataclasses import dataclass, field
from tokenize import TokenError
from typing import Callable

import numpy as np
import sympy as sp
from numpy.typing import NDArray
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

NONLINEARITY_VARIABLES = ("u",)
PERTURBATION_VARIABLES = ("x", "t", "v", "z")

ALLOWED_FUNCTIONS: dict[str, type] = dict(
    abs=sp.Abs,
    sign=sp.sign,
    exp=sp.exp,
    log=sp.log,
    sin=sp.sin,
    cos=sp.cos,
    tanh=sp.tanh,
)

ALLOWED_OPERATORS = frozenset({"+", "-", "*", "/", "^", "**", "(", ")"})


@dataclass(frozen=True)
class ParsedExpression:
    """An expression of the grammar, compiled to a vectorised numpy function.

    Args:
        source:
            The expression as written in the configuration.
        expression:
            The parsed sympy expression.
        variables:
            The names of the arguments, in call order.
    """

    source: str
    expression: sp.Expr
    variables: tuple[str, ...]
    function: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        symbols = [sp.Symbol(name, real=True) for name in self.variables]
        object.__setattr__(
            self, "function", sp.lambdify(symbols, self.expression, modules="numpy")
        )

    def __call__(self, *args: NDArray[np.float64] | float) -> NDArray[np.float64]:
        """Evaluate the expression, broadcasting constants to the argument shape."""
        shape = np.broadcast_shapes(*(np.shape(arg) for arg in args))
        values = np.asarray(self.function(*args), dtype=float)
        return values + np.zeros(shape)

    @property
    def is_zero(self) -> bool:
        """Whether the expression is identically zero."""
        return self.expression == 0

    def linear_coefficient(self) -> float | None:
        """The constant c if the expression is c times its single variable."""
        if len(self.variables) != 1 or self.is_zero:
            return None
        ratio = sp.simplify(
            self.expression / sp.Symbol(self.variables[0], real=True)
        )
        if ratio.free_symbols or not ratio.is_number:
            return None
        return float(ratio)


def check_tokens(source: str, variables: tuple[str, ...]) -> None:
    """Reject any token outside the grammar before the source is evaluated.

    Raises:
        ValueError:
            If the source contains a token that is not a real literal, an operator of
            the grammar, an admissible variable or an allowed function.

    Examples:
        >>> check_tokens("u^2 + tanh(u)", ("u",))
        >>> check_tokens("u.real", ("u",))
        Traceback (most recent call last):
        ...
        ValueError: Unsupported token '.' in 'u.real'.
    """
    names = set(variables) | set(ALLOWED_FUNCTIONS)
    skipped = {tokenize.NEWLINE, tokenize.NL, tokenize.ENDMARKER}
    try:
        tokens = list(tokenize.generate_tokens(io.StringIO(source).readline))
    except (TokenError, SyntaxError) as e:
        raise ValueError(f"Could not tokenize the expression {source!r}: {e}") from e
    for token in tokens:
        if token.type in skipped:
            continue
        match token.type:
            case tokenize.NUMBER:
                try:
                    float(token.string)
                except ValueError:
                    raise ValueError(
                        f"Unsupported literal {token.string!r} in {source!r}."
                    ) from None
            case tokenize.NAME if token.string in names:
                continue
            case tokenize.OP if token.string in ALLOWED_OPERATORS:
                continue
            case _:
                raise ValueError(f"Unsupported token {token.string!r} in {source!r}.")


def parse_perturbation(source: str, variables: tuple[str, ...]) -> ParsedExpression:
    """Parse an expression of the perturbation grammar.

    The grammar consists of numeric literals, the given variables, the operators
    `+ - * / ^` and the functions `abs, sign, exp, log, sin, cos, tanh`.

    Args:
        source:
            The expression, e.g. `"-u + 0.5*tanh(u)"`.
        variables:
            The admissible variable names, in call order.

    Returns:
        The compiled expression.

    Raises:
        ValueError:
            If the expression contains tokens outside the grammar, cannot be parsed
            or uses other symbols or functions. The tokens are checked before
            anything is evaluated.

    Examples:
        >>> f = parse_perturbation("-u^2", ("u",))
        >>> float(f(3.0))
        -9.0
    """
    source = str(source).strip()
    check_tokens(source, variables)

    local_dict: dict = {name: sp.Symbol(name, real=True) for name in variables}
    local_dict |= ALLOWED_FUNCTIONS
    try:
        expression = parse_expr(
            source,
            local_dict=local_dict,
            transformations=standard_transformations + (convert_xor,),
        )
    except (SyntaxError, TypeError, TokenError, sp.SympifyError) as e:
        raise ValueError(f"Could not parse the expression {source!r}: {e}") from e

    if not isinstance(expression, sp.Expr):
        raise ValueError(f"The expression {source!r} is not arithmetic.")

    unknown_symbols = {str(symbol) for symbol in expression.free_symbols} - set(
        variables
    )
    if unknown_symbols:
        raise ValueError(
            f"Unsupported variables {sorted(unknown_symbols)} in {source!r}; "
            f"allowed are {list(variables)}."
        )

    allowed_classes = tuple(ALLOWED_FUNCTIONS.values())
    for function in expression.atoms(sp.Function):
        if not isinstance(function, allowed_classes):
            raise ValueError(
                f"Unsupported function {function.func} in {source!r}; allowed are "
                f"{list(ALLOWED_FUNCTIONS)}."
            )

    return ParsedExpression(
        source=str(source), expression=expression, variables=variables
    )

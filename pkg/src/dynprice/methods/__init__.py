from dynprice.errors import InputError


def get_method(name):
    if name == "ga":
        from .ga import solve
    elif name == "baseline":
        from .baseline import solve
    else:
        raise InputError(f"Unknown method: {name}")

    return type('Method', (), {'solve': staticmethod(solve)})()

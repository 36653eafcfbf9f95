from mbinv.commands import check, demo2d, estimate, invert, opcount, table1

COMMANDS = (invert, check, table1, opcount, demo2d, estimate)

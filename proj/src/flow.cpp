namespace bachflow {}
